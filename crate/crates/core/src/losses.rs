//! Step-wise and trajectory-wise objectives.
//!
//! All losses are generic over [`Real`] so the same code yields plain values
//! and taped gradients. Predictions are `Pose<S>`; references are plain poses.

use alloc::vec::Vec;

use crate::autodiff::Real;
use crate::ego::{to_ego, EgoOffset};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::types::{Pose, Trajectory};

/// Default Chamfer neighbour band, in indices.
pub const DEFAULT_BAND: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Squared error of data-frame poses.
    Mse,
    /// Squared error of local-frame poses.
    EgoMse,
    /// Weighted two-sided nearest-neighbour distance.
    Chamfer,
    /// Squared error on every `gap`-th step.
    GappedMse,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::EgoMse => "egomse",
            LossKind::Chamfer => "chamfer",
            LossKind::GappedMse => "gapped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "mse" => LossKind::Mse,
            "egomse" | "ego" => LossKind::EgoMse,
            "chamfer" => LossKind::Chamfer,
            "gapped" | "gappedmse" => LossKind::GappedMse,
            _ => return None,
        })
    }

    /// True when the loss decomposes over steps.
    pub fn is_stepwise(&self) -> bool {
        !matches!(self, LossKind::Chamfer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Chamfer weight of the predicted-to-reference direction.
    pub alpha: f64,
    pub gap: usize,
    pub l2: f64,
    pub theta_weight: f64,
    /// Chamfer neighbour band (`None` is the exact O(n m) form).
    pub band: Option<usize>,
    /// Multiplier on position and angle residuals (1000 measures metres in mm).
    pub scale: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { kind: LossKind::EgoMse, alpha: 0.5, gap: 1, l2: 1e-4, theta_weight: 1.0, band: None, scale: 1.0 }
    }
}

impl LossConfig {
    pub fn chamfer(alpha: f64) -> Self {
        LossConfig { kind: LossKind::Chamfer, alpha, theta_weight: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.gap == 0 {
            return Err(invalid!("gap must be at least 1"));
        }
        if !(self.l2 >= 0.0) || !(self.theta_weight >= 0.0) || !(self.scale > 0.0) {
            return Err(invalid!("l2 and theta_weight must be non-negative and scale positive"));
        }
        Ok(())
    }
}

/// Weighted squared distance between a prediction and a reference pose.
#[inline]
pub fn pose_sq_error<S: Real>(p: Pose<S>, q: Pose, cfg: &LossConfig) -> S {
    let dx = (p.x - q.x) * cfg.scale;
    let dy = (p.y - q.y) * cfg.scale;
    let e = dx * dx + dy * dy;
    if cfg.theta_weight > 0.0 {
        let dt = (p.theta - q.theta) * cfg.scale;
        e + dt * dt * cfg.theta_weight
    } else {
        e
    }
}

fn check_aligned<S>(pred: &[Pose<S>], truth: &[Pose]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), found: pred.len(), what: "trajectory length" });
    }
    if pred.is_empty() {
        return Err(invalid!("empty trajectory"));
    }
    Ok(())
}

fn mean_over<S: Real>(terms: &[S]) -> S {
    S::weighted_sum(terms, &alloc::vec![1.0 / terms.len() as f64; terms.len()])
}

/// Mean over steps of the data-frame squared error.
pub fn mse_loss<S: Real>(pred: &[Pose<S>], truth: &[Pose], cfg: &LossConfig) -> Result<S> {
    check_aligned(pred, truth)?;
    let terms: Vec<S> = pred.iter().zip(truth).map(|(p, q)| pose_sq_error(*p, *q, cfg)).collect();
    Ok(mean_over(&terms))
}

/// [`mse_loss`] on plain trajectories.
pub fn trajectory_mse(pred: &Trajectory, truth: &Trajectory, cfg: &LossConfig) -> Result<f64> {
    let a: Vec<Pose> = pred.poses().copied().collect();
    let b: Vec<Pose> = truth.poses().copied().collect();
    mse_loss(&a, &b, cfg)
}

/// Squared error between a local-frame prediction and the reference pose
/// re-expressed in the same local frame.
pub fn ego_mse_loss<S: Real>(pred_ego: Pose<S>, truth_global: Pose, off: &EgoOffset<S>, cfg: &LossConfig) -> S {
    let like = pred_ego.x;
    let r = to_ego(truth_global.lift(like), off);
    let dx = (pred_ego.x - r.x) * cfg.scale;
    let dy = (pred_ego.y - r.y) * cfg.scale;
    let e = dx * dx + dy * dy;
    if cfg.theta_weight > 0.0 {
        let dt = (pred_ego.theta - r.theta) * cfg.scale;
        e + dt * dt * cfg.theta_weight
    } else {
        e
    }
}

/// Mean over indices `i ≡ 0 (mod gap)` of the data-frame squared error.
pub fn gapped_mse_loss<S: Real>(pred: &[Pose<S>], truth: &[Pose], cfg: &LossConfig) -> Result<S> {
    check_aligned(pred, truth)?;
    if cfg.gap == 0 {
        return Err(invalid!("gap must be at least 1"));
    }
    let terms: Vec<S> = pred.iter().zip(truth).step_by(cfg.gap).map(|(p, q)| pose_sq_error(*p, *q, cfg)).collect();
    Ok(mean_over(&terms))
}

fn plain_sq(p: &Pose, q: &Pose, cfg: &LossConfig) -> f64 {
    pose_sq_error(*p, *q, cfg)
}

/// Index range searched for the neighbour of element `i` of a sequence of
/// length `n` against one of length `m` (indices are matched proportionally).
fn band_range(i: usize, n: usize, m: usize, band: Option<usize>) -> core::ops::Range<usize> {
    match band {
        None => 0..m,
        Some(w) => {
            let c = if n > 1 { math::round(i as f64 * (m - 1) as f64 / (n - 1) as f64) as usize } else { 0 };
            c.saturating_sub(w)..(c + w + 1).min(m)
        }
    }
}

/// Weighted two-sided nearest-neighbour mean squared distance:
/// `(1 - alpha)` times the mean over reference points of the distance to the
/// closest prediction, plus `alpha` times the mean over predictions of the
/// distance to the closest reference point.
///
/// With `cfg.band = Some(w)` each point is only compared with the `±w`
/// proportionally aligned neighbours of the other sequence.
pub fn chamfer_alpha_loss<S: Real>(pred: &[Pose<S>], truth: &[Pose], cfg: &LossConfig) -> Result<S> {
    if pred.is_empty() || truth.is_empty() {
        return Err(invalid!("chamfer loss needs nonempty trajectories"));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(invalid!("alpha {} outside [0, 1]", cfg.alpha));
    }
    let pv: Vec<Pose> = pred.iter().map(|p| p.value()).collect();
    let (n, m) = (pred.len(), truth.len());
    let argmin = |a: &Pose, others: &[Pose], range: core::ops::Range<usize>| {
        let mut best = (f64::INFINITY, range.start);
        for j in range {
            let d = plain_sq(a, &others[j], cfg);
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    };
    let mut terms = Vec::with_capacity(n + m);
    let mut weights = Vec::with_capacity(n + m);
    // reference -> closest prediction
    for (i, q) in truth.iter().enumerate() {
        let j = argmin(q, &pv, band_range(i, m, n, cfg.band));
        terms.push(pose_sq_error(pred[j], *q, cfg));
        weights.push((1.0 - cfg.alpha) / m as f64);
    }
    // prediction -> closest reference
    for (i, p) in pv.iter().enumerate() {
        let j = argmin(p, truth, band_range(i, n, m, cfg.band));
        terms.push(pose_sq_error(pred[i], truth[j], cfg));
        weights.push(cfg.alpha / n as f64);
    }
    Ok(S::weighted_sum(&terms, &weights))
}

/// `l2 * sum w^2` over the entries where `mask` is true. `p` must be nonempty.
pub fn l2_penalty<S: Real>(p: &[S], mask: &[bool], l2: f64) -> S {
    let w: Vec<S> = p.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| *w).collect();
    if w.is_empty() {
        return p[0].zero_like();
    }
    S::mean_square(&w) * (l2 * w.len() as f64)
}

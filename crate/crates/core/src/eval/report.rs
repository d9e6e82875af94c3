use alloc::string::String;
use alloc::vec::Vec;

use super::rollout::{valid_starts, RolloutEngine, Track};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math;
use crate::models::{ModelSpec, NetMode};

/// Horizons reported by default, in steps.
pub const DEFAULT_LENGTHS: [usize; 6] = [1, 8, 64, 512, 4096, 32768];

/// Step-averaged position RMSE per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    /// `(length, rmse_mm, n_segments)`; lengths that do not fit are absent.
    pub rows: Vec<(usize, f64, usize)>,
}

impl EvalReport {
    pub fn rmse_at(&self, length: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == length).map(|r| r.1)
    }
}

/// Evenly strided subset of at most `max` candidates, deterministic.
pub fn stride_starts(candidates: &[usize], max: usize) -> Vec<usize> {
    let n = candidates.len();
    if max == 0 || n == 0 {
        return Vec::new();
    }
    if n <= max {
        return candidates.to_vec();
    }
    if max == 1 {
        return alloc::vec![candidates[n / 2]];
    }
    (0..max).map(|j| candidates[j * (n - 1) / (max - 1)]).collect()
}

/// Position RMSE in millimetres of predicted against observed poses
/// `k+1 ..= k+n`, averaged over steps.
pub fn segment_rmse_mm(pred: &[(f64, f64)], ds: &Dataset, k: usize) -> f64 {
    let mut acc = 0.0;
    for (i, (x, y)) in pred.iter().enumerate() {
        let q = ds.poses.points[k + 1 + i].pose;
        acc += (x - q.x) * (x - q.x) + (y - q.y) * (y - q.y);
    }
    math::sqrt(acc / pred.len() as f64) * 1000.0
}

/// Mean over segments of the step-averaged position RMSE (mm) for each
/// horizon in `lengths`.
///
/// Segments start at every admissible index (at least `history` seconds
/// into a contiguous run, or the model's own requirement if larger),
/// thinned to at most `max_segments` by a deterministic stride. Rollouts
/// of one horizon run in lock-step batches of up to `batch`.
pub fn rmse_by_length(
    spec: &ModelSpec,
    ds: &Dataset,
    lengths: &[usize],
    max_segments: usize,
    history: f64,
) -> Result<EvalReport> {
    let engine = RolloutEngine::new(spec, ds);
    let hist = history.max(spec.required_history());
    let mut rows = Vec::new();
    const BATCH: usize = 64;
    for &n in lengths {
        if n == 0 {
            return Err(Error::Invalid("evaluation length must be positive".into()));
        }
        let starts = stride_starts(&valid_starts(ds, n, hist, spec.window.history), max_segments);
        if starts.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for chunk in starts.chunks(BATCH) {
            let mut tracks: Vec<Track> = chunk.iter().map(|&k| engine.start(k)).collect::<Result<_>>()?;
            let mut acc = alloc::vec![0.0; chunk.len()];
            for i in 0..n {
                let out = engine.step(&spec.params.values, &mut tracks, i, &mut NetMode::Eval)?;
                for (b, o) in out.iter().enumerate() {
                    let q = ds.poses.points[chunk[b] + 1 + i].pose;
                    let (dx, dy) = (o.global.x - q.x, o.global.y - q.y);
                    acc[b] += dx * dx + dy * dy;
                }
            }
            for (b, a) in acc.iter().enumerate() {
                let r = math::sqrt(a / n as f64) * 1000.0;
                if !r.is_finite() {
                    return Err(Error::NonFinite(alloc::format!(
                        "rollout of {n} steps from index {} diverged",
                        chunk[b]
                    )));
                }
                total += r;
            }
        }
        rows.push((n, total / starts.len() as f64, starts.len()));
    }
    Ok(EvalReport { model: String::from(spec.kind.name()), rows })
}

/// One horizon of a two-model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub length: usize,
    pub a: f64,
    pub b: f64,
    /// `a / b`; below one means `a` is better.
    pub ratio: f64,
}

/// Joins two reports on their common horizons.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Vec<Comparison> {
    a.rows
        .iter()
        .filter_map(|&(len, ra, _)| b.rmse_at(len).map(|rb| Comparison { length: len, a: ra, b: rb, ratio: ra / rb }))
        .collect()
}

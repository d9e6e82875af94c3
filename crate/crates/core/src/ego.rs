//! Egocentric frame management.
//!
//! A rollout keeps an [`EgoOffset`] mapping the moving local frame back to
//! the data frame, plus the last `H` poses expressed in that local frame. The
//! model only ever sees local poses and commands re-timed so that "now" is
//! zero; translation, rotation and time shifts of the data therefore cannot
//! change its inputs.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::autodiff::Real;
use crate::error::{invalid, Result};
use crate::math;
use crate::types::{Command, Pose};

/// Which symmetries the rollout frame enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformMode {
    /// Raw data-frame coordinates.
    None,
    /// Re-centered on the latest pose, heading left in the data frame.
    Translational,
    /// Re-centered and rotated into the latest pose's heading.
    Egocentric,
}

impl TransformMode {
    pub fn name(&self) -> &'static str {
        match self {
            TransformMode::None => "none",
            TransformMode::Translational => "translational",
            TransformMode::Egocentric => "egocentric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(TransformMode::None),
            "translational" => Some(TransformMode::Translational),
            "egocentric" | "ego" => Some(TransformMode::Egocentric),
            _ => None,
        }
    }
}

/// Rigid transform from the local frame to the data frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoOffset<S = f64> {
    pub dx: S,
    pub dy: S,
    pub dtheta: S,
}

impl<S: Real> EgoOffset<S> {
    pub fn from_pose(q: Pose<S>) -> Self {
        EgoOffset { dx: q.x, dy: q.y, dtheta: q.theta }
    }

    pub fn as_pose(&self) -> Pose<S> {
        Pose::new(self.dx, self.dy, self.dtheta)
    }

    pub fn value(&self) -> EgoOffset {
        EgoOffset { dx: self.dx.value(), dy: self.dy.value(), dtheta: self.dtheta.value() }
    }

    pub fn detach(&self) -> Self {
        EgoOffset { dx: self.dx.detach(), dy: self.dy.detach(), dtheta: self.dtheta.detach() }
    }
}

impl EgoOffset {
    pub const ZERO: EgoOffset = EgoOffset { dx: 0.0, dy: 0.0, dtheta: 0.0 };

    pub fn lift<S: Real>(&self, like: S) -> EgoOffset<S> {
        EgoOffset { dx: like.lift(self.dx), dy: like.lift(self.dy), dtheta: like.lift(self.dtheta) }
    }
}

/// Homogeneous planar rotation acting on `(x, y, theta)`; the heading slot
/// passes through unchanged.
pub fn rotation_matrix(dtheta: f64) -> [[f64; 3]; 3] {
    let (s, c) = (math::sin(dtheta), math::cos(dtheta));
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Local pose to data frame: `offset + R(dtheta) * r`.
#[inline]
pub fn from_ego<S: Real>(r: Pose<S>, off: &EgoOffset<S>) -> Pose<S> {
    let (s, c) = (off.dtheta.sin(), off.dtheta.cos());
    Pose { x: off.dx + c * r.x - s * r.y, y: off.dy + s * r.x + c * r.y, theta: off.dtheta + r.theta }
}

/// Data-frame pose to local frame: `R(dtheta)^-1 * (q - offset)`.
#[inline]
pub fn to_ego<S: Real>(q: Pose<S>, off: &EgoOffset<S>) -> Pose<S> {
    let (s, c) = (off.dtheta.sin(), off.dtheta.cos());
    let (dx, dy) = (q.x - off.dx, q.y - off.dy);
    Pose { x: c * dx + s * dy, y: -s * dx + c * dy, theta: q.theta - off.dtheta }
}

/// `q` expressed relative to `anchor`, both in the same frame.
#[inline]
fn relative<S: Real>(q: Pose<S>, anchor: Pose<S>) -> Pose<S> {
    to_ego(q, &EgoOffset::from_pose(anchor))
}

/// Per-rollout frame state: offset plus the last `H` local poses
/// (most recent last).
#[derive(Debug, Clone)]
pub struct EgoState<S = f64> {
    pub mode: TransformMode,
    pub offset: EgoOffset<S>,
    pub history: VecDeque<Pose<S>>,
    capacity: usize,
}

impl<S: Real> EgoState<S> {
    /// Starts a rollout from the last `H` observed data-frame poses
    /// (oldest first). The offset anchors at the oldest of them.
    pub fn start(mode: TransformMode, recent: &[Pose<S>]) -> Result<Self> {
        let h = recent.len();
        if h == 0 {
            return Err(invalid!("history length must be at least 1"));
        }
        let anchor = recent[0];
        let zero = anchor.x.lift(0.0);
        let offset = match mode {
            TransformMode::None => EgoOffset { dx: zero, dy: zero, dtheta: zero },
            TransformMode::Translational => EgoOffset { dx: anchor.x, dy: anchor.y, dtheta: zero },
            TransformMode::Egocentric => EgoOffset::from_pose(anchor),
        };
        let mut st = EgoState { mode, offset, history: VecDeque::with_capacity(h + 1), capacity: h };
        for q in recent {
            let local = st.local_of(*q);
            st.history.push_back(local);
        }
        if mode == TransformMode::Egocentric {
            st.history[0] = Pose::new(zero, zero, zero);
        }
        Ok(st)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Data-frame pose for a local-frame pose.
    #[inline]
    pub fn to_global(&self, r: Pose<S>) -> Pose<S> {
        match self.mode {
            TransformMode::None => r,
            TransformMode::Translational => Pose::new(self.offset.dx + r.x, self.offset.dy + r.y, r.theta),
            TransformMode::Egocentric => from_ego(r, &self.offset),
        }
    }

    /// Local-frame pose for a data-frame pose.
    #[inline]
    pub fn local_of(&self, q: Pose<S>) -> Pose<S> {
        match self.mode {
            TransformMode::None => q,
            TransformMode::Translational => Pose::new(q.x - self.offset.dx, q.y - self.offset.dy, q.theta),
            TransformMode::Egocentric => to_ego(q, &self.offset),
        }
    }

    /// Newest local pose (the robot's current pose in the model's frame).
    pub fn current(&self) -> Pose<S> {
        *self.history.back().expect("history is never empty")
    }

    /// Appends a predicted local pose and rebases the frame onto the oldest
    /// retained pose; every retained pose is re-expressed in the new frame.
    pub fn advance(&mut self, r_new: Pose<S>) {
        self.history.push_back(r_new);
        while self.history.len() > self.capacity {
            self.history.pop_front();
        }
        let anchor = self.history[0];
        let zero = anchor.x.lift(0.0);
        match self.mode {
            TransformMode::None => {}
            TransformMode::Translational => {
                self.offset.dx = self.offset.dx + anchor.x;
                self.offset.dy = self.offset.dy + anchor.y;
                for p in self.history.iter_mut().skip(1) {
                    *p = Pose::new(p.x - anchor.x, p.y - anchor.y, p.theta);
                }
                self.history[0] = Pose::new(zero, zero, anchor.theta);
            }
            TransformMode::Egocentric => {
                self.offset = EgoOffset::from_pose(from_ego(anchor, &self.offset));
                for p in self.history.iter_mut().skip(1) {
                    *p = relative(*p, anchor);
                }
                self.history[0] = Pose::new(zero, zero, zero);
            }
        }
    }

    /// Cuts gradient flow through the offset and history.
    pub fn detach(&mut self) {
        self.offset = self.offset.detach();
        self.history.iter_mut().for_each(|p| *p = p.detach());
    }

    /// Flattened history, oldest first.
    pub fn history_features(&self, out: &mut Vec<S>) {
        for p in &self.history {
            out.extend_from_slice(&[p.x, p.y, p.theta]);
        }
    }
}

/// Functional form of [`EgoState::advance`].
pub fn advance_offset<S: Real>(st: &EgoState<S>, r_new: Pose<S>) -> EgoState<S> {
    let mut next = st.clone();
    next.advance(r_new);
    next
}

/// Re-times commands so that `now` is the origin. Fails on any command
/// issued after `now`.
pub fn reorigin_timestamps(cmds: &[Command], now: f64) -> Result<Vec<Command>> {
    cmds.iter()
        .map(|c| {
            if c.t > now {
                Err(invalid!("command at t={} is after now={}", c.t, now))
            } else {
                Ok(Command { t: c.t - now, ..*c })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Pose, b: Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && (a.theta - b.theta).abs() < tol
    }

    fn matvec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
        core::array::from_fn(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
    }

    #[test]
    fn rotation_matrix_basics() {
        assert_eq!(rotation_matrix(0.0), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let v = matvec(&rotation_matrix(FRAC_PI_2), [1.0, 0.0, 0.0]);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && v[2] == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
            let (ra, rb, rab) = (rotation_matrix(a), rotation_matrix(b), rotation_matrix(a + b));
            for i in 0..3 {
                for j in 0..3 {
                    let prod: f64 = (0..3).map(|k| ra[i][k] * rb[k][j]).sum();
                    assert!((prod - rab[i][j]).abs() < 1e-12);
                }
            }
            let det = ra[0][0] * ra[1][1] - ra[0][1] * ra[1][0];
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ego_conversions() {
        let off = EgoOffset { dx: 1.0, dy: 2.0, dtheta: FRAC_PI_2 };
        let g = from_ego(Pose::new(1.0, 0.0, 0.0), &off);
        assert!(close(g, Pose::new(1.0, 3.0, FRAC_PI_2), 1e-12));
        let r = to_ego(Pose::new(1.0, 3.0, FRAC_PI_2), &off);
        assert!(close(r, Pose::new(1.0, 0.0, 0.0), 1e-12));
        assert_eq!(to_ego(off.as_pose(), &off), Pose::ORIGIN);
        let p = Pose::new(0.3, -0.7, 2.0);
        assert_eq!(from_ego(p, &EgoOffset::ZERO), p);
    }

    #[test]
    fn ego_inverse_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let mut p =
                || Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-10.0..10.0));
            let (r, o) = (p(), p());
            let off = EgoOffset::from_pose(o);
            let back = to_ego(from_ego(r, &off), &off);
            worst = worst.max((back.x - r.x).abs()).max((back.y - r.y).abs()).max((back.theta - r.theta).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn advance_h1() {
        let mut st = EgoState::start(TransformMode::Egocentric, &[Pose::ORIGIN]).unwrap();
        st.advance(Pose::new(0.1, 0.0, 0.0));
        assert_eq!(st.offset, EgoOffset { dx: 0.1, dy: 0.0, dtheta: 0.0 });
        assert_eq!(st.history.len(), 1);
        assert_eq!(st.history[0], Pose::ORIGIN);

        let mut st = EgoState::start(TransformMode::Egocentric, &[Pose::new(0.0, 0.0, FRAC_PI_2)]).unwrap();
        st.advance(Pose::new(0.1, 0.0, 0.0));
        assert!(close(st.offset.as_pose(), Pose::new(0.0, 0.1, FRAC_PI_2), 1e-15));
    }

    #[test]
    fn rebasing_matches_global_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [TransformMode::Egocentric, TransformMode::Translational, TransformMode::None] {
            let start = Pose::new(1.5, -0.5, 0.7);
            let mut st = EgoState::start(mode, &[start]).unwrap();
            // accumulate in the data frame: integrate body-frame steps directly
            let mut g = start;
            for _ in 0..100 {
                let (fwd, lat, turn) =
                    (rng.random_range(0.0..0.02), rng.random_range(-0.002..0.002), rng.random_range(-0.05..0.05));
                let (s, c) = (math::sin(g.theta), math::cos(g.theta));
                let next = Pose::new(g.x + c * fwd - s * lat, g.y + s * fwd + c * lat, g.theta + turn);
                let local = st.local_of(next);
                let predicted = st.to_global(local);
                assert!(close(predicted, next, 1e-12));
                st.advance(local);
                g = next;
            }
            let last = st.to_global(st.current());
            assert!(close(last, g, 1e-9), "{mode:?}: {last:?} vs {g:?}");
        }
    }

    #[test]
    fn longer_history_reexpressed() {
        let qs = [Pose::new(0.0, 0.0, 0.0), Pose::new(0.1, 0.0, 0.1), Pose::new(0.2, 0.01, 0.2)];
        let mut st = EgoState::start(TransformMode::Egocentric, &qs).unwrap();
        assert_eq!(st.history[0], Pose::ORIGIN);
        for (q, h) in qs.iter().zip(&st.history) {
            assert!(close(st.to_global(*h), *q, 1e-12));
        }
        let next = Pose::new(0.3, 0.03, 0.3);
        st.advance(st.local_of(next));
        assert_eq!(st.history.len(), 3);
        assert!(close(st.offset.as_pose(), qs[1], 1e-12));
        assert!(close(st.to_global(st.current()), next, 1e-12));
    }

    #[test]
    fn reorigin() {
        let cmds = [Command::new(9.8, 1.0, 0.0), Command::new(9.9, 0.5, 0.1), Command::new(10.0, 0.0, 0.2)];
        let r = reorigin_timestamps(&cmds, 10.0).unwrap();
        let ts: Vec<f64> = r.iter().map(|c| c.t).collect();
        assert!((ts[0] + 0.2).abs() < 1e-12 && (ts[1] + 0.1).abs() < 1e-12 && ts[2] == 0.0);
        assert_eq!(r[1].s_c, 0.5);
        assert!(reorigin_timestamps(&[], 10.0).unwrap().is_empty());
        assert!(reorigin_timestamps(&[Command::new(10.1, 0.0, 0.0)], 10.0).is_err());
    }
}

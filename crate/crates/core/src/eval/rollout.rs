use alloc::vec::Vec;

use crate::analytical::{actuator_update, warm_actuator};
use crate::autodiff::Real;
use crate::dataset::Dataset;
use crate::ego::{EgoOffset, EgoState};
use crate::error::{Error, Result};
use crate::math;
use crate::models::{CommandWindow, ModelSpec, NetMode, StepContext};
use crate::types::{ChassisTwist, Pose, TimedPose, Trajectory};

/// State of one rollout in progress.
#[derive(Debug, Clone)]
pub struct Track<S = f64> {
    /// Index of the initial observed pose `q_k`.
    pub start: usize,
    pub state: EgoState<S>,
    /// Formulated actuator state (does not depend on learned parameters).
    pub twist: ChassisTwist,
}

impl<S: Real> Track<S> {
    /// Plain-value snapshot (drops any tape references).
    pub fn value(&self) -> Track<f64> {
        let st = &self.state;
        let mut state = EgoState::start(st.mode, &alloc::vec![Pose::ORIGIN; st.capacity()]).expect("capacity >= 1");
        state.offset = st.offset.value();
        state.history = st.history.iter().map(|p| p.value()).collect();
        Track { start: self.start, state, twist: self.twist }
    }
}

impl Track<f64> {
    /// Same state as constants on the tape (or type) of `like`.
    pub fn lift<S: Real>(&self, like: S) -> Track<S> {
        let st = &self.state;
        let mut state =
            EgoState::start(st.mode, &alloc::vec![Pose::ORIGIN.lift(like); st.capacity()]).expect("capacity >= 1");
        state.offset = st.offset.lift(like);
        state.history = st.history.iter().map(|p| p.lift(like)).collect();
        Track { start: self.start, state, twist: self.twist }
    }
}

/// One step's output for one rollout.
#[derive(Debug, Clone, Copy)]
pub struct StepOut<S> {
    /// Predicted pose in the local frame, `r_hat`.
    pub local: Pose<S>,
    /// Frame offset the prediction was made in.
    pub offset: EgoOffset<S>,
    /// Predicted data-frame pose, `q_hat`.
    pub global: Pose<S>,
}

/// Drives a model over a dataset, one lock-stepped batch of rollouts at a time.
pub struct RolloutEngine<'a> {
    pub spec: &'a ModelSpec,
    pub ds: &'a Dataset,
    pub dt: f64,
}

impl<'a> RolloutEngine<'a> {
    pub fn new(spec: &'a ModelSpec, ds: &'a Dataset) -> Self {
        RolloutEngine { spec, ds, dt: ds.dt() }
    }

    /// Initial state at observed pose `k`: the frame anchors on the last `H`
    /// observed poses and the actuator state is replayed from rest.
    pub fn start(&self, k: usize) -> Result<Track<f64>> {
        let h = self.spec.window.history;
        if k >= self.ds.len() || k + 1 < h {
            return Err(Error::Invalid(alloc::format!("start index {k} out of range")));
        }
        let recent: Vec<Pose> = self.ds.poses.points[k + 1 - h..=k].iter().map(|p| p.pose).collect();
        let state = EgoState::start(self.spec.transform, &recent)?;
        let now = self.ds.poses.points[k].t;
        let first_cmd = self.ds.commands[0].t;
        if now - first_cmd < self.spec.window.span {
            return Err(Error::Insufficient(alloc::format!(
                "less than {} s of commands before t={now}",
                self.spec.window.span
            )));
        }
        let twist = if self.spec.kind.uses_formulated() {
            let steps = math::round(self.spec.warmup / self.dt) as usize;
            let reach = steps as f64 * self.dt + self.spec.robot.cmd_latency;
            let w = CommandWindow::gather(&self.ds.commands, now, self.spec.window.span, self.spec.window.bins, reach)?;
            warm_actuator(&w, &self.spec.robot, self.dt, steps)
        } else {
            ChassisTwist::default()
        };
        Ok(Track { start: k, state, twist })
    }

    /// Advances every track by one step (step `i` moves from pose `k + i`
    /// to `k + i + 1`). Only commands issued up to `t_{k+i}` are read.
    pub fn step<S: Real>(
        &self,
        p: &[S],
        tracks: &mut [Track<S>],
        i: usize,
        mode: &mut NetMode<'_>,
    ) -> Result<Vec<StepOut<S>>> {
        let spec = self.spec;
        let mut windows = Vec::with_capacity(tracks.len());
        for tr in tracks.iter_mut() {
            let idx = tr.start + i;
            let now = self
                .ds
                .poses
                .points
                .get(idx)
                .ok_or_else(|| Error::Insufficient("rollout runs past the data".into()))?
                .t;
            let w = CommandWindow::gather(
                &self.ds.commands,
                now,
                spec.window.span,
                spec.window.bins,
                spec.command_reach(),
            )?;
            if spec.kind.uses_formulated() {
                tr.twist = actuator_update(tr.twist, w.hold_at(-spec.robot.cmd_latency), &spec.robot, self.dt);
            }
            windows.push(w);
        }
        let ctx: Vec<StepContext<'_, S>> = tracks
            .iter()
            .zip(&windows)
            .map(|(tr, w)| StepContext { state: &tr.state, window: w, twist: tr.twist })
            .collect();
        let locals = spec.predict_batch(p, &ctx, self.dt, mode)?;
        drop(ctx);
        let mut out = Vec::with_capacity(tracks.len());
        for (tr, r) in tracks.iter_mut().zip(locals) {
            let offset = tr.state.offset;
            let global = tr.state.to_global(r);
            tr.state.advance(r);
            out.push(StepOut { local: r, offset, global });
        }
        Ok(out)
    }
}

/// Start indices from which an `n`-step rollout stays inside one contiguous
/// run and has `history` seconds of that run behind it.
pub fn valid_starts(ds: &Dataset, n: usize, history: f64, h: usize) -> Vec<usize> {
    let pts = &ds.poses.points;
    let mut out = Vec::new();
    for run in ds.runs() {
        let t_run = pts[run.start].t;
        let c = ds.commands.partition_point(|c| c.t < t_run);
        let Some(first_cmd) = ds.commands.get(c) else { continue };
        let t0 = t_run.max(first_cmd.t);
        let lo = run.start + h.saturating_sub(1);
        if run.end < run.start + n + 1 {
            continue;
        }
        let hi = run.end - 1 - n;
        out.extend((lo..=hi).filter(|&k| pts[k].t - t0 >= history));
    }
    out
}

/// Rolls `spec` out for `n` steps from observed pose `k`; returns the `n`
/// predicted poses on timestamps `t_{k+1} ..= t_{k+n}`.
pub fn rollout(spec: &ModelSpec, ds: &Dataset, k: usize, n: usize) -> Result<Trajectory> {
    if k + n >= ds.len() {
        return Err(Error::Invalid(alloc::format!("rollout {k}+{n} exceeds {} poses", ds.len())));
    }
    let engine = RolloutEngine::new(spec, ds);
    let mut tracks = [engine.start(k)?];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = engine.step(&spec.params.values, &mut tracks, i, &mut NetMode::Eval)?;
        let q = s[0].global;
        if !q.is_finite() {
            return Err(Error::NonFinite(alloc::format!("prediction at step {i} from start {k}")));
        }
        out.push(TimedPose { t: ds.poses.points[k + i + 1].t, pose: q });
    }
    Ok(Trajectory::new(out))
}

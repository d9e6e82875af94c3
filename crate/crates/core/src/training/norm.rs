use alloc::vec;
use alloc::vec::Vec;

use crate::analytical::{actuator_update, kinematics_step};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{stride_starts, valid_starts, RolloutEngine};
use crate::math;
use crate::models::{featurize, CommandWindow, ModelKind, ModelSpec, NormStats};
use crate::types::ChassisTwist;

/// Maximum number of single-step samples used to fit normalization.
pub const NORM_SAMPLES: usize = 20_000;

struct Moments {
    n: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments { n: 0, sum: vec![0.0; d], sq: vec![0.0; d] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (i, v) in x.iter().enumerate() {
            self.sum[i] += v;
            self.sq[i] += v * v;
        }
    }

    /// Mean and standard deviation; dimensions without spread get scale 1.
    fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let scale = self
            .sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                let sd = math::sqrt(var);
                if sd > 1e-9 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        (mean, scale)
    }
}

/// Fits input standardization and output scaling on observed single steps
/// of `ds` and installs them in `spec`.
///
/// Outputs are scaled so that a unit network output corresponds to one
/// standard deviation of what it has to predict: the local step for the
/// learned models, the commanded twist for the dynamical hybrid and the
/// residual of the formulated step for the kinematic hybrid. Hybrid output
/// means are zero so a zero network leaves the formulated model unchanged.
pub fn fit_norm_stats(spec: &mut ModelSpec, ds: &Dataset, history: f64) -> Result<()> {
    if spec.kind == ModelKind::ParamOnly {
        return Ok(());
    }
    let hist = history.max(spec.required_history());
    let starts = stride_starts(&valid_starts(ds, 1, hist, spec.window.history), NORM_SAMPLES);
    if starts.is_empty() {
        return Err(Error::Insufficient("no admissible single-step samples for normalization".into()));
    }
    let dt = ds.dt();
    let mut feats = Moments::new(spec.input_dim());
    let mut outs = Moments::new(spec.output_dim());
    let engine = RolloutEngine::new(spec, ds);
    for &k in &starts {
        let tr = engine.start(k)?;
        let now = ds.poses.points[k].t;
        let w = CommandWindow::gather(&ds.commands, now, spec.window.span, spec.window.bins, spec.command_reach())?;
        let mut f = featurize(&tr.state, &w);
        let target = tr.state.local_of(ds.poses.points[k + 1].pose);
        let formulated = || {
            let tw: ChassisTwist = actuator_update(tr.twist, w.hold_at(-spec.robot.cmd_latency), &spec.robot, dt);
            kinematics_step(tr.state.current(), tw, dt)
        };
        match spec.kind {
            ModelKind::Lr | ModelKind::Mlp => outs.push(&[target.x, target.y, target.theta]),
            ModelKind::FormulatedPlusMlp => {
                let (s, o) = w.hold_at(0.0);
                outs.push(&[s, o]);
            }
            ModelKind::MlpPlusFormulated => {
                let fo = formulated();
                f.extend_from_slice(&[fo.x, fo.y, fo.theta]);
                outs.push(&[target.x - fo.x, target.y - fo.y, target.theta - fo.theta]);
            }
            ModelKind::ParamOnly => unreachable!(),
        }
        feats.push(&f);
    }
    let (feat_mean, feat_scale) = feats.finish();
    let (mut out_mean, out_scale) = outs.finish();
    if spec.kind.uses_formulated() {
        out_mean.iter_mut().for_each(|m| *m = 0.0);
    }
    spec.norm = NormStats { feat_mean, feat_scale, out_mean, out_scale };
    Ok(())
}

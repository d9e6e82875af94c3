use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Real, Tape, Var};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{RolloutEngine, Track};
use crate::losses::{chamfer_alpha_loss, ego_mse_loss, l2_penalty, pose_sq_error, LossConfig, LossKind};
use crate::math;
use crate::models::{ModelSpec, NetMode};
use crate::types::Pose;

use super::config::GradMode;

/// Objective value and gradient of one batch of rollouts.
#[derive(Debug, Clone)]
pub struct LossGrad {
    /// Data term plus weight decay.
    pub loss: f64,
    /// Data term only (mean per compared step, or mean Chamfer value).
    pub data_loss: f64,
    /// Gradient with respect to `spec.params` (zero on non-learnable entries).
    pub grad: Vec<f64>,
    /// Parameter vector with batch-norm running statistics folded in
    /// (train mode only).
    pub running: Option<Vec<f64>>,
}

fn lift_tracks<'t>(tracks: &[Track<f64>], like: Var<'t>) -> Vec<Track<Var<'t>>> {
    tracks.iter().map(|t| t.lift(like)).collect()
}

/// Rolls out `length` steps from each start on a tape and differentiates
/// the configured loss with respect to the model parameters.
///
/// Step-wise losses are averaged over batch and compared steps. With
/// `bptt > 0` the gradient is cut every `bptt` steps: each chunk is
/// differentiated on its own and the tape is rewound, so memory stays
/// bounded by one chunk. Chamfer losses keep the whole rollout on the tape
/// (cuts then only detach the state).
///
/// `train` selects batch statistics for batch-norm layers (and collects the
/// updated running statistics); otherwise running statistics are used.
pub fn rollout_loss_grad(
    spec: &ModelSpec,
    ds: &Dataset,
    starts: &[usize],
    length: usize,
    loss: &LossConfig,
    bptt: usize,
    train: bool,
) -> Result<LossGrad> {
    rollout_loss_grad_on(&Tape::new(), spec, ds, starts, length, loss, bptt, train)
}

/// [`rollout_loss_grad`] recording on a caller-owned tape (which is reset
/// first), so its buffers are reused across calls.
#[allow(clippy::too_many_arguments)]
pub fn rollout_loss_grad_on(
    tape: &Tape,
    spec: &ModelSpec,
    ds: &Dataset,
    starts: &[usize],
    length: usize,
    loss: &LossConfig,
    bptt: usize,
    train: bool,
) -> Result<LossGrad> {
    if !spec.kind.is_differentiable() || spec.params.is_empty() {
        return Err(Error::Invalid(alloc::format!("model kind {} has no trainable parameters", spec.kind.name())));
    }
    if starts.is_empty() || length == 0 {
        return Err(Error::Invalid("empty batch or zero length".into()));
    }
    loss.validate()?;
    let b = starts.len();
    let engine = RolloutEngine::new(spec, ds);
    let init: Vec<Track<f64>> = starts.iter().map(|&k| engine.start(k)).collect::<Result<_>>()?;
    for &k in starts {
        if k + length >= ds.len() {
            return Err(Error::Insufficient(alloc::format!("segment {k}+{length} runs past the data")));
        }
    }
    let mask = spec.learnable();
    tape.reset();
    let pv = tape.params(&spec.params);
    let mark = tape.len();
    let like = pv.vars[0];
    let mut tracks = lift_tracks(&init, like);
    let mut running = if train { Some(spec.params.values.clone()) } else { None };
    let mut grad = vec![0.0; spec.params.len()];
    let mut total = 0.0;
    let mut data_total = 0.0;

    let compared = match loss.kind {
        LossKind::GappedMse => length.div_ceil(loss.gap),
        _ => length,
    };
    let w_step = 1.0 / (b * compared) as f64;
    let mut terms: Vec<Var<'_>> = Vec::new();
    let mut preds: Vec<Vec<Pose<Var<'_>>>> = vec![Vec::new(); if loss.kind.is_stepwise() { 0 } else { b }];
    let mut first_chunk = true;

    let mut finish = |terms: &[Var<'_>], weights: f64, first: bool, step: usize| -> Result<()> {
        let data = if terms.is_empty() { None } else { Some(Var::weighted_sum(terms, &vec![weights; terms.len()])) };
        let reg = if first && loss.l2 > 0.0 { Some(l2_penalty(&pv.vars, &mask, loss.l2)) } else { None };
        let out = match (data, reg) {
            (Some(d), Some(r)) => d + r,
            (Some(d), None) => d,
            (None, Some(r)) => r,
            (None, None) => return Ok(()),
        };
        let dv = data.map_or(0.0, |d| d.value());
        if !out.value().is_finite() {
            return Err(Error::NonFinite(alloc::format!("loss is {} after step {step} (data term {dv})", out.value())));
        }
        let g = tape.backward(out, &pv)?;
        for (a, v) in grad.iter_mut().zip(&g.values) {
            *a += v;
        }
        total += out.value();
        data_total += dv;
        Ok(())
    };

    for i in 0..length {
        let out = match running.as_deref_mut() {
            Some(r) => engine.step(&pv.vars, &mut tracks, i, &mut NetMode::Train { running: r })?,
            None => engine.step(&pv.vars, &mut tracks, i, &mut NetMode::Eval)?,
        };
        for (j, o) in out.iter().enumerate() {
            let truth = ds.poses.points[starts[j] + i + 1].pose;
            match loss.kind {
                LossKind::EgoMse => terms.push(ego_mse_loss(o.local, truth, &o.offset, loss)),
                LossKind::Mse => terms.push(pose_sq_error(o.global, truth, loss)),
                LossKind::GappedMse => {
                    if i % loss.gap == 0 {
                        terms.push(pose_sq_error(o.global, truth, loss));
                    }
                }
                LossKind::Chamfer => preds[j].push(o.global),
            }
        }
        let cut = bptt > 0 && (i + 1) % bptt == 0 && i + 1 < length;
        if loss.kind.is_stepwise() && (cut || i + 1 == length) {
            finish(&terms, w_step, first_chunk, i)?;
            first_chunk = false;
            terms.clear();
            if cut {
                let snapshot: Vec<Track<f64>> = tracks.iter().map(|t| t.value()).collect();
                drop(tracks);
                tape.rewind(mark);
                tracks = lift_tracks(&snapshot, like);
            }
        } else if cut {
            tracks.iter_mut().for_each(|t| t.state.detach());
        }
    }
    if !loss.kind.is_stepwise() {
        let mut parts = Vec::with_capacity(b);
        for (j, p) in preds.iter().enumerate() {
            let truth: Vec<Pose> = (1..=length).map(|i| ds.poses.points[starts[j] + i].pose).collect();
            parts.push(chamfer_alpha_loss(p, &truth, loss)?);
        }
        finish(&parts, 1.0 / b as f64, true, length - 1)?;
    }
    if let Some(r) = running.as_mut() {
        // keep only the running statistics; learnable entries stay as given
        for (i, v) in r.iter_mut().enumerate() {
            if mask[i] {
                *v = spec.params.values[i];
            }
        }
    }
    Ok(LossGrad { loss: total, data_loss: data_total, grad, running })
}

/// Applies the gradient mode to the learnable entries; returns the norm
/// before rescaling.
pub fn apply_grad_mode(grad: &mut [f64], mask: &[bool], mode: GradMode) -> f64 {
    let norm = math::sqrt(grad.iter().zip(mask).filter(|(_, &m)| m).map(|(g, _)| g * g).sum::<f64>());
    let scale = match mode {
        GradMode::Raw => 1.0,
        GradMode::Normalized if norm > 0.0 => 1.0 / norm,
        GradMode::Normalized => 1.0,
        GradMode::Clipped(c) if norm > c => c / norm,
        GradMode::Clipped(_) => 1.0,
    };
    if scale != 1.0 {
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ego::TransformMode;
    use crate::eval::valid_starts;
    use crate::models::{ModelKind, RolloutWindow};
    use crate::testutil::{collected, random_spec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LEARNED: [ModelKind; 4] =
        [ModelKind::Lr, ModelKind::Mlp, ModelKind::FormulatedPlusMlp, ModelKind::MlpPlusFormulated];

    fn setup(kind: ModelKind, seed: u64) -> (ModelSpec, Dataset, Vec<usize>) {
        let ds = collected(20.0, seed % 3);
        let window = RolloutWindow { history: 2, ..Default::default() };
        let spec = random_spec(kind, TransformMode::Egocentric, window, seed);
        let cands = valid_starts(&ds, 8, spec.required_history(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts = (0..4).map(|_| cands[rng.random_range(0..cands.len())]).collect();
        (spec, ds, starts)
    }

    fn loss_at(
        spec: &ModelSpec,
        ds: &Dataset,
        starts: &[usize],
        cfg: &LossConfig,
        train: bool,
        i: usize,
        v: f64,
    ) -> f64 {
        let mut s = spec.clone();
        s.params.values[i] = v;
        rollout_loss_grad(&s, ds, starts, 8, cfg, 0, train).unwrap().loss
    }

    fn check_fd(kind: ModelKind, seed: u64, cfg: &LossConfig, train: bool) {
        let (spec, ds, starts) = setup(kind, seed);
        let g = rollout_loss_grad(&spec, &ds, &starts, 8, cfg, 0, train).unwrap().grad;
        let mask = spec.learnable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        let idx: Vec<usize> = (0..spec.params.len()).filter(|&i| mask[i]).collect();
        for _ in 0..25 {
            let i = idx[rng.random_range(0..idx.len())];
            let x = spec.params.values[i];
            // ReLU kinks (dense under batch statistics) can sit within one
            // step, so the check passes if any step of the ladder agrees
            let ok = [1e-4, 1e-3, 1e-6, 1e-7].iter().any(|&rel| {
                let h = rel * x.abs().max(1.0);
                let fd = (loss_at(&spec, &ds, &starts, cfg, train, i, x + h)
                    - loss_at(&spec, &ds, &starts, cfg, train, i, x - h))
                    / (2.0 * h);
                (g[i] - fd).abs() <= 1e-7_f64.max(1e-4 * fd.abs())
            });
            assert!(ok, "{kind:?} seed {seed} param {i}: {}", g[i]);
        }
        for (i, m) in mask.iter().enumerate() {
            if !m {
                assert_eq!(g[i], 0.0);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = LossConfig { l2: 1e-3, ..Default::default() };
        for kind in LEARNED {
            for seed in 0..3 {
                check_fd(kind, seed, &cfg, false);
            }
            check_fd(kind, 7, &cfg, true);
        }
    }

    #[test]
    fn other_losses_differentiate_correctly() {
        for cfg in [
            LossConfig { kind: LossKind::Mse, ..Default::default() },
            LossConfig { kind: LossKind::GappedMse, gap: 3, ..Default::default() },
            LossConfig::chamfer(0.5),
            LossConfig { band: Some(2), ..LossConfig::chamfer(0.25) },
        ] {
            check_fd(ModelKind::Mlp, 11, &cfg, false);
            check_fd(ModelKind::FormulatedPlusMlp, 12, &cfg, false);
        }
    }

    #[test]
    fn ego_and_global_mse_agree() {
        let (spec, ds, starts) = setup(ModelKind::Mlp, 4);
        let ego =
            rollout_loss_grad(&spec, &ds, &starts, 8, &LossConfig { l2: 0.0, ..Default::default() }, 0, false).unwrap();
        let glob = rollout_loss_grad(
            &spec,
            &ds,
            &starts,
            8,
            &LossConfig { kind: LossKind::Mse, l2: 0.0, ..Default::default() },
            0,
            false,
        )
        .unwrap();
        assert!((ego.loss - glob.loss).abs() <= 1e-10 * glob.loss.max(1.0));
    }

    #[test]
    fn truncation_keeps_values_and_cuts_gradients() {
        let cfg = LossConfig::default();
        for kind in [ModelKind::Lr, ModelKind::Mlp, ModelKind::FormulatedPlusMlp] {
            let (spec, ds, starts) = setup(kind, 5);
            let full = rollout_loss_grad(&spec, &ds, &starts, 8, &cfg, 0, false).unwrap();
            let whole = rollout_loss_grad(&spec, &ds, &starts, 8, &cfg, 8, false).unwrap();
            assert_eq!(full.grad, whole.grad);
            let cut = rollout_loss_grad(&spec, &ds, &starts, 8, &cfg, 1, false).unwrap();
            assert!((cut.loss - full.loss).abs() <= 1e-9 * full.loss);

            // oracle for a cut at every step: one-step losses from detached states
            let engine = RolloutEngine::new(&spec, &ds);
            let mut tracks: Vec<Track<f64>> = starts.iter().map(|&k| engine.start(k).unwrap()).collect();
            let mut expect = vec![0.0; spec.params.len()];
            let w = 1.0 / (8 * starts.len()) as f64;
            for i in 0..8 {
                let tape = Tape::new();
                let pv = tape.params(&spec.params);
                let mut lifted: Vec<Track<Var<'_>>> = tracks.iter().map(|t| t.lift(pv.vars[0])).collect();
                let out = engine.step(&pv.vars, &mut lifted, i, &mut NetMode::Eval).unwrap();
                let mut total = None;
                for (j, o) in out.iter().enumerate() {
                    let e = ego_mse_loss(o.local, ds.poses.points[starts[j] + i + 1].pose, &o.offset, &cfg) * w;
                    total = Some(total.map_or(e, |t| t + e));
                }
                let mut total = total.unwrap();
                if i == 0 {
                    total = total + l2_penalty(&pv.vars, &spec.learnable(), cfg.l2);
                }
                let g = tape.backward(total, &pv).unwrap();
                expect.iter_mut().zip(&g.values).for_each(|(a, b)| *a += b);
                tracks = lifted.iter().map(|t| t.value()).collect();
            }
            for (a, b) in cut.grad.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-12 + 1e-9 * b.abs(), "{kind:?}: {a} vs {b}");
            }
            assert_ne!(cut.grad, full.grad);
        }
    }

    #[test]
    fn train_mode_collects_running_statistics() {
        let (spec, ds, starts) = setup(ModelKind::Mlp, 6);
        let lg = rollout_loss_grad(&spec, &ds, &starts, 4, &LossConfig::default(), 0, true).unwrap();
        let r = lg.running.unwrap();
        let mask = spec.learnable();
        let mut changed = 0;
        for i in 0..r.len() {
            if mask[i] {
                assert_eq!(r[i], spec.params.values[i]);
            } else if r[i] != spec.params.values[i] {
                changed += 1;
            }
        }
        assert!(changed > 0);
        let lr = setup(ModelKind::Lr, 6);
        assert!(rollout_loss_grad(&lr.0, &lr.1, &lr.2, 4, &LossConfig::default(), 0, false).unwrap().running.is_none());
    }

    #[test]
    fn bad_requests_are_rejected() {
        let (spec, ds, starts) = setup(ModelKind::Lr, 0);
        let cfg = LossConfig::default();
        assert!(rollout_loss_grad(&spec, &ds, &[], 8, &cfg, 0, false).is_err());
        assert!(rollout_loss_grad(&spec, &ds, &starts, 0, &cfg, 0, false).is_err());
        assert!(rollout_loss_grad(&spec, &ds, &[ds.len() - 3], 8, &cfg, 0, false).is_err());
        let p = ModelSpec::new(
            ModelKind::ParamOnly,
            TransformMode::Egocentric,
            RolloutWindow::default(),
            Default::default(),
            0,
        )
        .unwrap();
        assert!(rollout_loss_grad(&p, &ds, &starts, 8, &cfg, 0, false).is_err());
    }

    #[test]
    fn grad_modes() {
        let mask = [true, true, false];
        let mut g = [3.0, 4.0, 100.0];
        assert_eq!(apply_grad_mode(&mut g, &mask, GradMode::Normalized), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15 && g[2] == 20.0);
        let mut g = [3.0, 4.0, 0.0];
        apply_grad_mode(&mut g, &mask, GradMode::Clipped(1.0));
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = [0.3, 0.4, 0.0];
        apply_grad_mode(&mut g, &mask, GradMode::Clipped(1.0));
        assert_eq!(g, [0.3, 0.4, 0.0]);
        let mut g = [0.0; 3];
        apply_grad_mode(&mut g, &mask, GradMode::Normalized);
        assert_eq!(g, [0.0; 3]);
    }
}

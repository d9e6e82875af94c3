use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::TrainConfig;
use super::grad::{apply_grad_mode, rollout_loss_grad_on};
use crate::autodiff::Tape;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{rmse_by_length, valid_starts};
use crate::models::ModelSpec;

/// Stage lengths `start, 2 start, ..., max`.
pub fn stage_lengths(start: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut l = start.max(1);
    while l <= max {
        out.push(l);
        l *= 2;
    }
    out
}

/// Uniformly sampled segment starts (with replacement) for rollouts of
/// `length` steps that keep `history` seconds of run history behind them.
pub fn sample_batch(
    ds: &Dataset,
    length: usize,
    batch: usize,
    history: f64,
    window_history: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if length >= ds.len() {
        return Err(Error::Insufficient(alloc::format!("{length}-step segments do not fit {} poses", ds.len())));
    }
    let cands = valid_starts(ds, length, history, window_history);
    draw(&cands, batch, rng, length)
}

fn draw(cands: &[usize], batch: usize, rng: &mut impl Rng, length: usize) -> Result<Vec<usize>> {
    if cands.is_empty() {
        return Err(Error::Insufficient(alloc::format!("no admissible start for {length}-step segments")));
    }
    Ok((0..batch).map(|_| cands[rng.random_range(0..cands.len())]).collect())
}

/// One point of the training curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Updates applied so far (over all stages).
    pub update: u64,
    pub length: usize,
    /// Mean data loss over the epoch.
    pub train_loss: f64,
    /// Validation RMSE (mm) at the stage length after the epoch.
    pub val_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageLog {
    pub length: usize,
    pub epochs: usize,
    pub updates: u64,
    /// Validation RMSE (mm) of the parameters the stage started from.
    pub initial_val: f64,
    pub best_val: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub stages: Vec<StageLog>,
    pub curve: Vec<CurvePoint>,
}

/// Optimizer state carried across epochs and stages.
#[derive(Debug)]
pub struct Trainer {
    pub cfg: TrainConfig,
    adam: Adam,
    tape: Tape,
    rng: ChaCha8Rng,
    starts: Option<(usize, Vec<usize>)>,
}

impl Trainer {
    pub fn new(spec: &ModelSpec, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if !spec.kind.is_differentiable() {
            return Err(Error::Invalid(alloc::format!("model kind {} is not trained by gradient", spec.kind.name())));
        }
        let adam = Adam::new(spec.params.len(), cfg.beta1, cfg.beta2, cfg.eps);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Trainer { cfg, adam, tape: Tape::new(), rng, starts: None })
    }

    /// Updates applied so far.
    pub fn updates(&self) -> u64 {
        self.adam.steps()
    }

    /// Current learning rate.
    pub fn lr(&self) -> f64 {
        self.cfg.lr_at(self.adam.steps())
    }

    fn candidates(&mut self, spec: &ModelSpec, ds: &Dataset, length: usize) -> &[usize] {
        let stale = !matches!(&self.starts, Some((l, _)) if *l == length);
        if stale {
            let hist = self.cfg.history.max(spec.required_history());
            self.starts = Some((length, valid_starts(ds, length, hist, spec.window.history)));
        }
        &self.starts.as_ref().expect("just filled").1
    }

    /// One gradient update on a freshly sampled batch; returns the data loss.
    pub fn update(&mut self, spec: &mut ModelSpec, ds: &Dataset, length: usize) -> Result<f64> {
        let batch = self.cfg.batch_for(length);
        let mut rng = self.rng.clone();
        let starts = draw(self.candidates(spec, ds, length), batch, &mut rng, length)?;
        self.rng = rng;
        let lg = rollout_loss_grad_on(
            &self.tape,
            spec,
            ds,
            &starts,
            length,
            &self.cfg.loss,
            self.cfg.bptt_truncate,
            spec.has_mlp(),
        )
        .map_err(|e| match e {
            Error::NonFinite(m) => Error::NonFinite(alloc::format!("update {}: {m}", self.adam.steps() + 1)),
            e => e,
        })?;
        let mask = spec.learnable();
        let mut g = lg.grad;
        apply_grad_mode(&mut g, &mask, self.cfg.grad_mode);
        let lr = self.lr();
        self.adam.step(&mut spec.params.values, &g, &mask, lr);
        if let Some(r) = lg.running {
            for (i, v) in r.into_iter().enumerate() {
                if !mask[i] {
                    spec.params.values[i] = v;
                }
            }
        }
        if spec.params.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("parameters after update {}", self.adam.steps())));
        }
        Ok(lg.data_loss)
    }

    /// `eval_every` updates at `length`; returns the mean data loss.
    pub fn train_epoch(&mut self, spec: &mut ModelSpec, ds: &Dataset, length: usize) -> Result<f64> {
        let n = self.cfg.eval_every;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += self.update(spec, ds, length)?;
        }
        Ok(acc / n as f64)
    }

    /// Mean validation RMSE (mm) at `length`.
    pub fn validate(&self, spec: &ModelSpec, val: &Dataset, length: usize) -> Result<f64> {
        let r = rmse_by_length(spec, val, &[length], self.cfg.val_segments, self.cfg.history)?;
        r.rows
            .first()
            .map(|row| row.1)
            .ok_or_else(|| Error::Insufficient(alloc::format!("validation set has no room for {length}-step segments")))
    }

    /// Trains one stage until early stopping or the epoch cap and restores
    /// the best parameters seen by validation.
    pub fn run_stage(
        &mut self,
        spec: &mut ModelSpec,
        train: &Dataset,
        val: &Dataset,
        length: usize,
        log: &mut TrainLog,
    ) -> Result<()> {
        let initial_val = self.validate(spec, val, length)?;
        let mut best = initial_val;
        let mut best_params = spec.params.values.clone();
        let mut bad = 0;
        let mut epochs = 0;
        let first_update = self.updates();
        let mut stopped_early = false;
        while epochs < self.cfg.max_epochs_per_stage {
            let loss = self.train_epoch(spec, train, length)?;
            epochs += 1;
            let v = self.validate(spec, val, length)?;
            log.curve.push(CurvePoint { update: self.updates(), length, train_loss: loss, val_rmse: v });
            if v < best - self.cfg.min_improvement {
                best = v;
                best_params.clone_from(&spec.params.values);
                bad = 0;
            } else {
                bad += 1;
                if bad >= self.cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
        spec.params.values = best_params;
        log.stages.push(StageLog {
            length,
            epochs,
            updates: self.updates() - first_update,
            initial_val,
            best_val: best,
            stopped_early,
        });
        Ok(())
    }
}

/// Single epoch with a fresh optimizer; returns the updated model and the
/// mean training loss.
pub fn train_epoch(spec: &ModelSpec, ds: &Dataset, length: usize, cfg: &TrainConfig) -> Result<(ModelSpec, f64)> {
    let mut out = spec.clone();
    let mut t = Trainer::new(spec, cfg.clone())?;
    let loss = t.train_epoch(&mut out, ds, length)?;
    Ok((out, loss))
}

/// Trains on lengths `start_length, 2 start_length, ..., max_length`, each
/// stage warm-started from the previous stage's best parameters.
pub fn progressive_train(
    spec: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelSpec, TrainLog)> {
    let mut out = spec.clone();
    let mut t = Trainer::new(spec, cfg.clone())?;
    let mut log = TrainLog::default();
    for l in stage_lengths(cfg.start_length, cfg.max_length) {
        t.run_stage(&mut out, train, val, l, &mut log)?;
    }
    Ok((out, log))
}

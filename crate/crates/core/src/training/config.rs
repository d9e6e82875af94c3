use crate::error::{invalid, Result};
use crate::losses::LossConfig;
use crate::math;

/// Post-processing of the raw gradient before the optimizer sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradMode {
    Raw,
    /// Rescaled to unit Euclidean norm.
    Normalized,
    /// Rescaled to norm `c` when its norm exceeds `c`.
    Clipped(f64),
}

impl GradMode {
    pub fn name(&self) -> alloc::string::String {
        match self {
            GradMode::Raw => "raw".into(),
            GradMode::Normalized => "normalized".into(),
            GradMode::Clipped(c) => alloc::format!("clipped:{c}"),
        }
    }

    /// Parses `raw`, `normalized` or `clipped:<c>`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(GradMode::Raw),
            "normalized" => Some(GradMode::Normalized),
            _ => {
                let c: f64 = s.strip_prefix("clipped:")?.parse().ok()?;
                (c > 0.0).then_some(GradMode::Clipped(c))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Per-update exponential learning-rate decay.
    pub gamma: f64,
    /// Trajectory segments per update.
    pub batch_size: usize,
    /// Validations without improvement before a stage ends.
    pub patience: usize,
    /// Minimum validation improvement that resets the patience counter.
    pub min_improvement: f64,
    pub start_length: usize,
    pub max_length: usize,
    pub grad_mode: GradMode,
    /// Steps between gradient cuts; 0 backpropagates through the whole rollout.
    pub bptt_truncate: usize,
    pub seed: u64,
    /// Objective; `loss.l2` is the weight-decay coefficient.
    pub loss: LossConfig,
    /// Updates per epoch (one validation per epoch).
    pub eval_every: usize,
    /// Hard cap on epochs per stage.
    pub max_epochs_per_stage: usize,
    /// Cap on `batch * length`; the batch shrinks (to no fewer than 2) to fit.
    pub max_batch_steps: usize,
    /// Segments used for each validation.
    pub val_segments: usize,
    /// Seconds of run history required before any segment start.
    pub history: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 5e-4,
            gamma: 0.99999,
            batch_size: 200,
            patience: 32,
            min_improvement: 1e-12,
            start_length: 1,
            max_length: 4096,
            grad_mode: GradMode::Raw,
            bptt_truncate: 0,
            seed: 0,
            loss: LossConfig { scale: 1000.0, ..LossConfig::default() },
            eval_every: 10,
            max_epochs_per_stage: 1000,
            max_batch_steps: usize::MAX,
            val_segments: 64,
            history: 1.5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.initial_lr > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid!("learning rate must be positive and gamma in (0, 1]"));
        }
        if self.batch_size == 0 || self.patience == 0 || self.eval_every == 0 || self.val_segments == 0 {
            return Err(invalid!("batch size, patience, eval_every and val_segments must be positive"));
        }
        if self.start_length == 0 || self.max_length < self.start_length {
            return Err(invalid!("need 1 <= start_length <= max_length"));
        }
        if !self.max_length.is_power_of_two() || !self.start_length.is_power_of_two() {
            return Err(invalid!("stage lengths must be powers of two"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(invalid!("invalid Adam constants"));
        }
        Ok(())
    }

    /// Segments per update at rollout length `length`.
    pub fn batch_for(&self, length: usize) -> usize {
        self.batch_size.min((self.max_batch_steps / length.max(1)).max(2))
    }

    /// Learning rate after `n` updates.
    pub fn lr_at(&self, n: u64) -> f64 {
        self.initial_lr * math::pow(self.gamma, n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grad_mode_names_round_trip() {
        for m in [GradMode::Raw, GradMode::Normalized, GradMode::Clipped(2.5)] {
            assert_eq!(GradMode::parse(&m.name()), Some(m));
        }
        for bad in ["clipped:0", "clipped:-1", "clipped:", "clip", ""] {
            assert_eq!(GradMode::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn defaults_validate_and_bad_values_do_not() {
        let d = TrainConfig::default();
        d.validate().unwrap();
        assert!(TrainConfig { max_length: 100, ..d.clone() }.validate().is_err());
        assert!(TrainConfig { start_length: 8, max_length: 4, ..d.clone() }.validate().is_err());
        assert!(TrainConfig { initial_lr: 0.0, ..d.clone() }.validate().is_err());
        assert!(TrainConfig { gamma: 1.5, ..d.clone() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..d }.validate().is_err());
    }

    #[test]
    fn batch_shrinks_with_length() {
        let c = TrainConfig { batch_size: 32, max_batch_steps: 2048, ..Default::default() };
        assert_eq!(c.batch_for(1), 32);
        assert_eq!(c.batch_for(64), 32);
        assert_eq!(c.batch_for(128), 16);
        assert_eq!(c.batch_for(4096), 2);
    }

    proptest! {
        #[test]
        fn lr_decays_geometrically(n in 0u64..100_000, gamma in 0.999f64..=1.0) {
            let c = TrainConfig { initial_lr: 5e-4, gamma, ..Default::default() };
            let a = c.lr_at(n + 1) / c.lr_at(n);
            prop_assert!((a - gamma).abs() < 1e-9);
            prop_assert!(c.lr_at(n) <= 5e-4);
        }
    }
}

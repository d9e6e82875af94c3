//! Rollout-based optimization: truncated or full backpropagation through
//! time with Adam, the progressive length schedule with early stopping, and
//! derivative-free search over robot parameters.

mod adam;
mod config;
mod grad;
mod norm;
mod progressive;
mod search;

pub use adam::Adam;
pub use config::{GradMode, TrainConfig};
pub use grad::{apply_grad_mode, rollout_loss_grad, rollout_loss_grad_on, LossGrad};
pub use norm::{fit_norm_stats, NORM_SAMPLES};
pub use progressive::{
    progressive_train, sample_batch, stage_lengths, train_epoch, CurvePoint, StageLog, TrainLog, Trainer,
};
pub use search::{param_search, SearchConfig, SearchResult, SearchStrategy};

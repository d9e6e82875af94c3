//! Sequential rollouts and the RMSE-by-trajectory-length protocol.

mod report;
mod rollout;

pub use crate::models::RolloutWindow;
pub use report::{
    compare_reports, rmse_by_length, segment_rmse_mm, stride_starts, Comparison, EvalReport, DEFAULT_LENGTHS,
};
pub use rollout::{rollout, valid_starts, RolloutEngine, StepOut, Track};

//! Data-driven dynamics for unicycle-type wheeled robots.
//!
//! The crate learns a next-pose model from two asynchronous streams (timestamped
//! poses and speed commands) by differentiating a windowed sequential rollout.
//! Rollouts run in an egocentric frame so the learned dynamics respect
//! translational, rotational and time-translational symmetry.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! live in the companion `wheeldyn` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod math;

pub mod analytical;
pub mod autodiff;
pub mod datagen;
pub mod dataset;
pub mod ego;
pub mod eval;
pub mod losses;
pub mod models;
pub mod training;
pub mod types;

pub use dataset::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use types::{ChassisTwist, Command, Pose, TimedPose, Trajectory};

//! File formats, configuration, run manifests and the command line for
//! `wheeldyn-core`.
// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;

pub use error::{exit, exit_code, IoError};

//! Reverse-mode automatic differentiation over scalar computation graphs.
//!
//! A [`Tape`] records every scalar operation as a node with its parents and
//! local partial derivatives. Nodes are appended in evaluation order, so the
//! graph is acyclic by construction and a single reverse sweep yields the
//! adjoints. Numeric code is written once against the [`Real`] trait and runs
//! either on plain `f64` or on taped [`Var`]s.
//!
//! Besides the elementary operators there are a few fused n-ary nodes
//! ([`Real::dot`], [`Real::weighted_sum`], [`Real::mean_square`]) that keep
//! dense layers and batch statistics to one node per output scalar.

mod params;
mod real;
mod tape;

pub use params::{ParamVector, Segment};
pub use real::Real;
pub use tape::{Gradient, ParamVars, Tape, Var};

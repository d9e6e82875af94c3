use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::Var;
use crate::math;

/// Scalar arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Generic numeric code (kinematics, ego transforms, networks, losses) is
/// written once against this trait. Mixed operations with `f64` constants
/// avoid creating leaf nodes for literals.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living wherever `self` lives (same tape for `Var`).
    fn lift(self, v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn relu(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    /// Same value, no gradient flows through the result.
    fn detach(self) -> Self;
    /// `bias + sum_i w[i] * x[i]` as a single node.
    fn dot(w: &[Self], x: &[Self], bias: Self) -> Self;
    /// `sum_i c[i] * x[i]` as a single node. `xs` must be nonempty.
    fn weighted_sum(xs: &[Self], c: &[f64]) -> Self;
    /// `sum_i x[i]^2 / n` as a single node. `xs` must be nonempty.
    fn mean_square(xs: &[Self]) -> Self;

    #[inline]
    fn square(self) -> Self {
        self * self
    }

    fn zero_like(self) -> Self {
        self.lift(0.0)
    }
}

impl Real for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn lift(self, v: f64) -> Self {
        v
    }
    #[inline]
    fn sin(self) -> Self {
        math::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        math::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        math::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        math::sqrt(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        math::atan2(self, x)
    }
    #[inline]
    fn detach(self) -> Self {
        self
    }
    #[inline]
    fn dot(w: &[Self], x: &[Self], bias: Self) -> Self {
        w.iter().zip(x).fold(bias, |acc, (a, b)| acc + a * b)
    }
    fn weighted_sum(xs: &[Self], c: &[f64]) -> Self {
        xs.iter().zip(c).map(|(x, k)| x * k).sum()
    }
    fn mean_square(xs: &[Self]) -> Self {
        xs.iter().map(|x| x * x).sum::<f64>() * (1.0 / xs.len() as f64)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn value(self) -> f64 {
        Var::value(&self)
    }
    #[inline]
    fn lift(self, v: f64) -> Self {
        self.tape().constant(v)
    }
    fn sin(self) -> Self {
        self.sin_()
    }
    fn cos(self) -> Self {
        self.cos_()
    }
    fn exp(self) -> Self {
        self.exp_()
    }
    fn sqrt(self) -> Self {
        self.sqrt_()
    }
    fn relu(self) -> Self {
        self.relu_()
    }
    fn atan2(self, x: Self) -> Self {
        self.atan2_(x)
    }
    fn detach(self) -> Self {
        self.detach_()
    }
    fn dot(w: &[Self], x: &[Self], bias: Self) -> Self {
        Var::dot_(w, x, bias)
    }
    fn weighted_sum(xs: &[Self], c: &[f64]) -> Self {
        Var::weighted_sum_(xs, c)
    }
    fn mean_square(xs: &[Self]) -> Self {
        Var::mean_square_(xs)
    }
}

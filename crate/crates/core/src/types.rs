//! Planar robot state and stream records.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::math;

/// Planar posture `(x, y, theta)`; meters and radians.
///
/// `theta` is cumulative: trajectories keep it unwrapped so consecutive
/// headings differ by less than pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<S = f64> {
    pub x: S,
    pub y: S,
    pub theta: S,
}

impl<S> Pose<S> {
    pub const fn new(x: S, y: S, theta: S) -> Self {
        Pose { x, y, theta }
    }
}

impl Pose<f64> {
    pub const ORIGIN: Pose = Pose::new(0.0, 0.0, 0.0);

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Moves this pose onto a tape (or any other `Real`) as constants.
    pub fn lift<S: Real>(&self, like: S) -> Pose<S> {
        Pose::new(like.lift(self.x), like.lift(self.y), like.lift(self.theta))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

impl<S: Real> Pose<S> {
    pub fn value(&self) -> Pose {
        Pose::new(self.x.value(), self.y.value(), self.theta.value())
    }

    pub fn detach(&self) -> Self {
        Pose::new(self.x.detach(), self.y.detach(), self.theta.detach())
    }
}

/// A pose sample with its capture time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

/// Chassis longitudinal speed `s` (m/s) and yaw rate `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChassisTwist<S = f64> {
    pub s: S,
    pub omega: S,
}

impl<S> ChassisTwist<S> {
    pub const fn new(s: S, omega: S) -> Self {
        ChassisTwist { s, omega }
    }
}

/// A timestamped speed command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub t: f64,
    pub s_c: f64,
    pub omega_c: f64,
}

impl Command {
    pub const fn new(t: f64, s_c: f64, omega_c: f64) -> Self {
        Command { t, s_c, omega_c }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.s_c.is_finite() && self.omega_c.is_finite()
    }
}

/// Ordered pose samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub points: Vec<TimedPose>,
}

impl Trajectory {
    pub fn new(points: Vec<TimedPose>) -> Self {
        Trajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> {
        self.points.iter().map(|p| &p.pose)
    }

    /// Rewrites headings so that consecutive samples differ by less than pi.
    pub fn unwrap_theta(&mut self) {
        for i in 1..self.points.len() {
            let prev = self.points[i - 1].pose.theta;
            let cur = self.points[i].pose.theta;
            let d = cur - prev;
            if d.abs() >= PI {
                self.points[i].pose.theta = prev + math::wrap_angle(d);
            }
        }
    }

    /// Checks finiteness, non-negative strictly increasing time, and the
    /// heading continuity bound.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            let row = i + 1;
            if !p.t.is_finite() || !p.pose.is_finite() {
                return Err(Error::Data { stream: "poses", row, msg: "non-finite field".into() });
            }
            if p.t < 0.0 {
                return Err(Error::Data { stream: "poses", row, msg: "negative timestamp".into() });
            }
            if i > 0 {
                let prev = &self.points[i - 1];
                if p.t <= prev.t {
                    return Err(Error::Data {
                        stream: "poses",
                        row,
                        msg: alloc::format!("timestamp {} does not increase (previous {})", p.t, prev.t),
                    });
                }
                if (p.pose.theta - prev.pose.theta).abs() >= PI {
                    return Err(Error::Data { stream: "poses", row, msg: "heading jump of pi or more".into() });
                }
            }
        }
        Ok(())
    }
}

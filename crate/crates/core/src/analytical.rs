//! Hand-formulated differentiable unicycle dynamics.
//!
//! The formulated model is unicycle kinematics driven by a per-channel
//! first-order actuator with multiplicative slip gains and a command latency.
//! Its seven [`RobotParams`] are what the analytical-parameter model searches.

use crate::autodiff::Real;
use crate::error::{invalid, Result};
use crate::math;
use crate::models::CommandWindow;
use crate::types::{ChassisTwist, Pose};

/// Geometry and actuator parameters of a differential-drive robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    /// Wheel radius, meters.
    pub r: f64,
    /// Distance from the reference point to each driving wheel, meters.
    pub r_half: f64,
    /// Longitudinal actuator time constant, seconds (0 = instantaneous).
    pub tau_s: f64,
    /// Angular actuator time constant, seconds (0 = instantaneous).
    pub tau_w: f64,
    pub slip_gain_s: f64,
    pub slip_gain_w: f64,
    /// Delay between command issue and actuator response, seconds.
    pub cmd_latency: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            r: 0.1,
            r_half: 0.25,
            tau_s: 0.1,
            tau_w: 0.1,
            slip_gain_s: 1.0,
            slip_gain_w: 1.0,
            cmd_latency: 0.0,
        }
    }
}

impl RobotParams {
    /// Parameters of an ideal robot: no lag, no slip, no latency.
    pub fn ideal() -> Self {
        RobotParams { tau_s: 0.0, tau_w: 0.0, ..Self::default() }
    }

    pub const NAMES: [&'static str; 7] = ["r", "r_half", "tau_s", "tau_w", "slip_gain_s", "slip_gain_w", "cmd_latency"];

    pub fn to_array(&self) -> [f64; 7] {
        [self.r, self.r_half, self.tau_s, self.tau_w, self.slip_gain_s, self.slip_gain_w, self.cmd_latency]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        RobotParams {
            r: a[0],
            r_half: a[1],
            tau_s: a[2],
            tau_w: a[3],
            slip_gain_s: a[4],
            slip_gain_w: a[5],
            cmd_latency: a[6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("robot parameters must be finite"));
        }
        if !(self.r > 0.0 && self.r_half > 0.0) {
            return Err(invalid!("wheel radius and half axle must be positive"));
        }
        if self.tau_s < 0.0 || self.tau_w < 0.0 || self.cmd_latency < 0.0 {
            return Err(invalid!("time constants and latency must be non-negative"));
        }
        let gain_ok = |g: f64| g > 0.0 && g <= 2.0;
        if !gain_ok(self.slip_gain_s) || !gain_ok(self.slip_gain_w) {
            return Err(invalid!("slip gains must lie in (0, 2]"));
        }
        Ok(())
    }

    /// Per-step blend factor `1 - exp(-dt / tau)` for both channels.
    pub fn lag_blend(&self, dt: f64) -> (f64, f64) {
        let blend = |tau: f64| if tau > 0.0 { 1.0 - math::exp(-dt / tau) } else { 1.0 };
        (blend(self.tau_s), blend(self.tau_w))
    }
}

/// Left and right wheel angular speeds, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeeds {
    pub w_l: f64,
    pub w_r: f64,
}

/// Pure-rolling wheel speeds for a chassis twist.
pub fn twist_to_wheels(tw: ChassisTwist, p: &RobotParams) -> WheelSpeeds {
    WheelSpeeds { w_l: (tw.s - tw.omega * p.r_half) / p.r, w_r: (tw.s + tw.omega * p.r_half) / p.r }
}

/// Chassis twist implied by wheel speeds under pure rolling.
pub fn wheels_to_twist(ws: WheelSpeeds, p: &RobotParams) -> ChassisTwist {
    ChassisTwist { s: p.r * (ws.w_l + ws.w_r) / 2.0, omega: p.r * (ws.w_r - ws.w_l) / (2.0 * p.r_half) }
}

/// One explicit-Euler step of the unicycle kinematics.
#[inline]
pub fn kinematics_step<S: Real>(q: Pose<S>, tw: ChassisTwist<S>, dt: f64) -> Pose<S> {
    Pose { x: q.x + tw.s * q.theta.cos() * dt, y: q.y + tw.s * q.theta.sin() * dt, theta: q.theta + tw.omega * dt }
}

/// First-order actuator response to a (slip-scaled) command.
#[inline]
pub fn actuator_update<S: Real>(state: ChassisTwist<S>, cmd: (f64, f64), p: &RobotParams, dt: f64) -> ChassisTwist<S> {
    let (bs, bw) = p.lag_blend(dt);
    let target_s = p.slip_gain_s * cmd.0;
    let target_w = p.slip_gain_w * cmd.1;
    ChassisTwist { s: state.s + (-state.s + target_s) * bs, omega: state.omega + (-state.omega + target_w) * bw }
}

/// One step of the formulated model.
///
/// Reads the command in force `cmd_latency` seconds ago from the window
/// (zero-order hold), advances the actuator state, then integrates the
/// kinematics with the updated twist.
pub fn formulated_step<S: Real>(
    q: Pose<S>,
    tw_state: ChassisTwist<S>,
    window: &CommandWindow,
    p: &RobotParams,
    dt: f64,
) -> (Pose<S>, ChassisTwist<S>) {
    let cmd = window.hold_at(-p.cmd_latency);
    let tw = actuator_update(tw_state, cmd, p, dt);
    (kinematics_step(q, tw, dt), tw)
}

/// Actuator state reached after replaying `steps` periods of `dt` from rest,
/// ending just before the step at relative time 0. `window` must reach back
/// `steps * dt + cmd_latency` seconds.
pub fn warm_actuator(window: &CommandWindow, p: &RobotParams, dt: f64, steps: usize) -> ChassisTwist {
    let mut tw = ChassisTwist::new(0.0, 0.0);
    for j in (1..=steps).rev() {
        let cmd = window.hold_at(-(j as f64) * dt - p.cmd_latency);
        tw = actuator_update(tw, cmd, p, dt);
    }
    tw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Command;
    use core::f64::consts::FRAC_PI_2;

    fn geo() -> RobotParams {
        RobotParams { r: 0.1, r_half: 0.25, ..RobotParams::ideal() }
    }

    #[test]
    fn wheel_conversions() {
        let p = geo();
        let w = twist_to_wheels(ChassisTwist::new(1.0, 0.0), &p);
        assert!((w.w_l - 10.0).abs() < 1e-12 && (w.w_r - 10.0).abs() < 1e-12);
        let w = twist_to_wheels(ChassisTwist::new(0.0, 2.0), &p);
        assert!((w.w_l + 5.0).abs() < 1e-12 && (w.w_r - 5.0).abs() < 1e-12);
        let t = wheels_to_twist(WheelSpeeds { w_l: 10.0, w_r: 10.0 }, &p);
        assert!((t.s - 1.0).abs() < 1e-12 && t.omega.abs() < 1e-12);
        let t = wheels_to_twist(WheelSpeeds { w_l: -5.0, w_r: 5.0 }, &p);
        assert!(t.s.abs() < 1e-12 && (t.omega - 2.0).abs() < 1e-12);
        let t = wheels_to_twist(WheelSpeeds { w_l: 0.0, w_r: 0.0 }, &p);
        assert_eq!((t.s, t.omega), (0.0, 0.0));
    }

    #[test]
    fn euler_steps() {
        let q = kinematics_step(Pose::ORIGIN, ChassisTwist::new(1.0, 0.0), 0.1);
        assert!((q.x - 0.1).abs() < 1e-15 && q.y == 0.0 && q.theta == 0.0);
        let q = kinematics_step(Pose::new(0.0, 0.0, FRAC_PI_2), ChassisTwist::new(1.0, 0.0), 0.1);
        assert!(q.x.abs() < 1e-15 && (q.y - 0.1).abs() < 1e-15 && q.theta == FRAC_PI_2);
    }

    #[test]
    fn zero_speed_keeps_position() {
        let q0 = Pose::new(0.3, -0.2, 1.0);
        let q = kinematics_step(q0, ChassisTwist::new(0.0, 3.0), 0.05);
        assert_eq!((q.x, q.y), (q0.x, q0.y));
        let q = kinematics_step(q0, ChassisTwist::new(2.0, 0.0), 0.05);
        assert_eq!(q.theta, q0.theta);
    }

    #[test]
    fn arc_against_closed_form() {
        let mut q = Pose::ORIGIN;
        for _ in 0..1000 {
            q = kinematics_step(q, ChassisTwist::new(1.0, 1.0), 0.001);
        }
        let (x, y) = (math::sin(1.0), 1.0 - math::cos(1.0));
        assert!((q.x - x).abs() < 2e-3 && (q.y - y).abs() < 2e-3 && (q.theta - 1.0).abs() < 1e-12);
    }

    fn window(cmds: &[Command], now: f64) -> CommandWindow {
        CommandWindow::gather(cmds, now, 0.2, 5, 2.0).unwrap()
    }

    #[test]
    fn degenerate_formulated_equals_kinematics() {
        let cmds = [Command::new(0.0, 0.7, -0.4)];
        let w = window(&cmds, 0.5);
        let q0 = Pose::new(1.0, 2.0, 0.3);
        let (q, tw) = formulated_step(q0, ChassisTwist::new(0.0, 0.0), &w, &RobotParams::ideal(), 1.0 / 60.0);
        let direct = kinematics_step(q0, ChassisTwist::new(0.7, -0.4), 1.0 / 60.0);
        assert_eq!(q, direct);
        assert_eq!(tw, ChassisTwist::new(0.7, -0.4));
    }

    #[test]
    fn first_order_step_response() {
        let p = RobotParams { tau_s: 0.2, ..RobotParams::ideal() };
        let cmds = [Command::new(0.0, 1.0, 0.0)];
        let dt = 0.2 / 100.0;
        let mut tw = ChassisTwist::new(0.0, 0.0);
        let mut q = Pose::ORIGIN;
        for i in 0..100 {
            let w = window(&cmds, i as f64 * dt);
            (q, tw) = formulated_step(q, tw, &w, &p, dt);
        }
        assert!((tw.s - (1.0 - math::exp(-1.0))).abs() < 1e-12);
        assert!((tw.s - 0.6321).abs() < 1e-4);
        assert!(q.x > 0.0);
    }

    #[test]
    fn latency_delays_response() {
        let p = RobotParams { cmd_latency: 0.1, ..RobotParams::ideal() };
        let cmds = [Command::new(-1.0, 0.0, 0.0), Command::new(0.0, 1.0, 1.0)];
        let dt = 0.01;
        let mut tw = ChassisTwist::new(0.0, 0.0);
        let mut q = Pose::ORIGIN;
        for i in 0..20 {
            let now = i as f64 * dt + 0.005;
            let w = window(&cmds, now);
            (q, tw) = formulated_step(q, tw, &w, &p, dt);
            if now < 0.1 {
                assert_eq!(tw, ChassisTwist::new(0.0, 0.0), "moved early at {now}");
            } else {
                assert_eq!(tw, ChassisTwist::new(1.0, 1.0));
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(RobotParams::default().validate().is_ok());
        assert!(RobotParams { r: 0.0, ..Default::default() }.validate().is_err());
        assert!(RobotParams { slip_gain_s: 2.5, ..Default::default() }.validate().is_err());
        assert!(RobotParams { cmd_latency: -0.1, ..Default::default() }.validate().is_err());
    }
}

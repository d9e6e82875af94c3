//! Synthetic ground truth: a hidden-parameter robot oracle, a turn-then-drive
//! navigation controller and the unattended collection loop.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analytical::{actuator_update, kinematics_step, twist_to_wheels, wheels_to_twist, RobotParams, WheelSpeeds};
use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{invalid, Result};
use crate::math::{self, wrap_angle};
use crate::types::{ChassisTwist, Command, Pose, TimedPose, Trajectory};

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64, pad: f64) -> bool {
        x >= self.x0 - pad && x <= self.x1 + pad && y >= self.y0 - pad && y <= self.y1 + pad
    }

    /// Rectangle shrunk by `m` on every side (collapsing to the centre line
    /// when too small).
    pub fn shrink(&self, m: f64) -> Rect {
        let (cx, cy) = ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0);
        let hx = ((self.x1 - self.x0) / 2.0 - m).max(0.0);
        let hy = ((self.y1 - self.y0) / 2.0 - m).max(0.0);
        Rect { x0: cx - hx, y0: cy - hy, x1: cx + hx, y1: cy + hy }
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// Oracle and collection settings. `true_params` are hidden from learners.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub true_params: RobotParams,
    /// Standard deviation of the log of the per-wheel speed multiplier.
    pub slip_noise_std: f64,
    /// Capture noise on recorded positions (metres).
    pub pose_noise_std: f64,
    /// Capture noise on recorded headings (radians).
    pub heading_noise_std: f64,
    pub pose_rate_hz: f64,
    pub command_rate_hz: f64,
    /// Time of the first command; keeps command and pose clocks apart.
    pub command_phase: f64,
    pub safe_area: Rect,
    /// Targets are sampled this far inside the safe area.
    pub target_margin: f64,
    pub s_max: f64,
    pub omega_max: f64,
    pub stuck_timeout: f64,
    pub arrive_dist: f64,
    pub arrive_angle: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            true_params: RobotParams {
                slip_gain_s: 0.9,
                slip_gain_w: 1.1,
                tau_s: 0.15,
                tau_w: 0.15,
                cmd_latency: 0.04,
                ..RobotParams::default()
            },
            slip_noise_std: 0.02,
            pose_noise_std: 0.001,
            heading_noise_std: 0.001,
            pose_rate_hz: 60.0,
            command_rate_hz: 25.0,
            command_phase: 0.0047,
            safe_area: Rect { x0: -2.0, y0: -2.0, x1: 2.0, y1: 2.0 },
            target_margin: 0.3,
            s_max: 0.5,
            omega_max: 1.5,
            stuck_timeout: 10.0,
            arrive_dist: 0.05,
            arrive_angle: 0.1,
            seed: 0,
        }
    }
}

impl OracleConfig {
    /// Noise-free oracle with the given parameters.
    pub fn noiseless(true_params: RobotParams) -> Self {
        OracleConfig {
            true_params,
            slip_noise_std: 0.0,
            pose_noise_std: 0.0,
            heading_noise_std: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        if !(self.pose_rate_hz > 0.0) || !(self.command_rate_hz > 0.0) {
            return Err(invalid!("rates must be positive"));
        }
        let a = &self.safe_area;
        if !(a.x1 > a.x0) || !(a.y1 > a.y0) {
            return Err(invalid!("safe area is degenerate"));
        }
        if !(self.slip_noise_std >= 0.0) || !(self.pose_noise_std >= 0.0) || !(self.heading_noise_std >= 0.0) {
            return Err(invalid!("noise standard deviations must be non-negative"));
        }
        if !(self.s_max >= 0.0) || !(self.omega_max >= 0.0) || !(self.stuck_timeout > 0.0) {
            return Err(invalid!("limits must be non-negative and the stuck timeout positive"));
        }
        if !(self.command_phase >= 0.0) {
            return Err(invalid!("command phase must be non-negative"));
        }
        Ok(())
    }

    pub fn target_area(&self) -> Rect {
        self.safe_area.shrink(self.target_margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavTarget {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Hidden simulation state.
#[derive(Debug, Clone)]
pub struct OracleState {
    /// Index of the current pose tick.
    pub step: usize,
    pub latent: Pose,
    pub twist: ChassisTwist,
    slip_rng: ChaCha8Rng,
    capture_rng: ChaCha8Rng,
}

impl OracleState {
    pub fn new(start: Pose, cfg: &OracleConfig) -> Self {
        OracleState {
            step: 0,
            latent: start,
            twist: ChassisTwist::default(),
            slip_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a17_0001),
            capture_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a17_0002),
        }
    }

    pub fn time(&self, cfg: &OracleConfig) -> f64 {
        self.step as f64 / cfg.pose_rate_hz
    }

    /// The latent pose as the capture system would record it.
    pub fn observe(&mut self, cfg: &OracleConfig) -> TimedPose {
        let mut q = self.latent;
        if cfg.pose_noise_std > 0.0 {
            q.x += cfg.pose_noise_std * gauss(&mut self.capture_rng);
            q.y += cfg.pose_noise_std * gauss(&mut self.capture_rng);
        }
        if cfg.heading_noise_std > 0.0 {
            q.theta += cfg.heading_noise_std * gauss(&mut self.capture_rng);
        }
        TimedPose { t: self.time(cfg), pose: q }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Command in force `latency` seconds before `now` (zero-order hold over a
/// time-sorted stream; `(0, 0)` before the first command).
pub fn held_command(commands: &[Command], now: f64, latency: f64) -> (f64, f64) {
    let n = commands.partition_point(|c| c.t <= now);
    let m = commands[..n].partition_point(|c| c.t - now <= -latency);
    match m.checked_sub(1) {
        Some(i) => (commands[i].s_c, commands[i].omega_c),
        None => (0.0, 0.0),
    }
}

/// Advances the oracle by one pose period and returns the recorded (noisy)
/// pose. The actuator follows the true parameters; each wheel's speed is
/// then scaled by a lognormal slip factor before integration.
pub fn oracle_step(state: &mut OracleState, commands: &[Command], cfg: &OracleConfig, dt: f64) -> TimedPose {
    let p = &cfg.true_params;
    let now = state.time(cfg);
    let cmd = held_command(commands, now, p.cmd_latency);
    state.twist = actuator_update(state.twist, cmd, p, dt);
    let mut tw = state.twist;
    if cfg.slip_noise_std > 0.0 {
        let w = twist_to_wheels(tw, p);
        let kl = math::exp(cfg.slip_noise_std * gauss(&mut state.slip_rng));
        let kr = math::exp(cfg.slip_noise_std * gauss(&mut state.slip_rng));
        tw = wheels_to_twist(WheelSpeeds { w_l: w.w_l * kl, w_r: w.w_r * kr }, p);
    }
    state.latent = kinematics_step(state.latent, tw, dt);
    state.step += 1;
    state.observe(cfg)
}

/// Uniform target in `area` with heading uniform in `[-pi, pi)`.
pub fn sample_target(area: &Rect, rng: &mut impl Rng) -> NavTarget {
    let u = |rng: &mut _, a: f64, b: f64| if b > a { a + (b - a) * Rng::random::<f64>(rng) } else { a };
    NavTarget {
        x: u(rng, area.x0, area.x1),
        y: u(rng, area.y0, area.y1),
        theta: u(rng, -core::f64::consts::PI, core::f64::consts::PI),
    }
}

/// True when `pose` is within the arrival tolerances of `target`.
pub fn arrived(pose: &Pose, target: &NavTarget, cfg: &OracleConfig) -> bool {
    let (dx, dy) = (target.x - pose.x, target.y - pose.y);
    let d = math::sqrt(dx * dx + dy * dy);
    d <= cfg.arrive_dist && wrap_angle(target.theta - pose.theta).abs() <= cfg.arrive_angle
}

/// Turn-in-place rate level for a heading error.
fn turn_level(err: f64) -> f64 {
    let k = if err.abs() > 1.0 {
        1.0
    } else if err.abs() > 0.5 {
        0.5
    } else {
        0.2
    };
    k * err.signum()
}

/// Turn-then-drive policy with a quantized command vocabulary.
///
/// Far from the target: turn in place while the bearing error exceeds
/// 0.3 rad, otherwise drive at one of four speed levels with a small
/// steering correction. At the target position: turn to the target heading.
pub fn nav_controller(pose: &Pose, target: &NavTarget, cfg: &OracleConfig) -> (f64, f64) {
    let (dx, dy) = (target.x - pose.x, target.y - pose.y);
    let dist = math::sqrt(dx * dx + dy * dy);
    let (s, w) = if dist > cfg.arrive_dist {
        let e = wrap_angle(math::atan2(dy, dx) - pose.theta);
        if e.abs() > 0.3 {
            (0.0, turn_level(e))
        } else {
            let k = if dist > 1.0 {
                1.0
            } else if dist > 0.5 {
                0.75
            } else if dist > 0.25 {
                0.5
            } else {
                0.25
            };
            let corr = if e.abs() > 0.1 { 0.2 * e.signum() } else { 0.0 };
            (k, corr)
        }
    } else {
        let e = wrap_angle(target.theta - pose.theta);
        if e.abs() > cfg.arrive_angle {
            (0.0, turn_level(e))
        } else {
            (0.0, 0.0)
        }
    };
    (s * cfg.s_max, w * cfg.omega_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetReason {
    Arrived,
    Stuck,
}

/// A target change during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetReset {
    pub t: f64,
    pub reason: ResetReason,
    pub target: NavTarget,
}

/// Output of [`collect`].
#[derive(Debug, Clone)]
pub struct Collection {
    pub dataset: Dataset,
    /// Noise-free poses on the same timestamps as the recorded ones.
    pub latent: Trajectory,
    /// The initial target followed by every reset.
    pub resets: Vec<TargetReset>,
}

/// Runs the unattended collection loop for `duration` seconds.
///
/// Poses are recorded at `pose_rate_hz` starting at t = 0; commands are
/// issued at `command_rate_hz` from the most recent recorded pose. A new
/// target is drawn on arrival or when the robot has not moved 5 cm or
/// turned 0.1 rad for `stuck_timeout` seconds.
pub fn collect(cfg: &OracleConfig, duration: f64) -> Result<Collection> {
    cfg.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid!("duration must be positive"));
    }
    let dt = 1.0 / cfg.pose_rate_hz;
    let n_poses = math::floor(duration * cfg.pose_rate_hz + 1e-9) as usize + 1;
    let (cx, cy) = cfg.safe_area.center();
    let mut state = OracleState::new(Pose::new(cx, cy, 0.0), cfg);
    let mut target_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a17_0003);
    let area = cfg.target_area();
    let mut target = sample_target(&area, &mut target_rng);
    let mut resets = alloc::vec![TargetReset { t: 0.0, reason: ResetReason::Arrived, target }];
    let mut poses = Vec::with_capacity(n_poses);
    let mut latent = Vec::with_capacity(n_poses);
    let mut commands: Vec<Command> = Vec::new();
    let mut next_cmd = 0usize;
    let mut anchor = (state.latent, 0.0);

    let mut obs = state.observe(cfg);
    for j in 0..n_poses {
        poses.push(obs);
        latent.push(TimedPose { t: obs.t, pose: state.latent });
        if j + 1 == n_poses {
            break;
        }
        let t_next = (j + 1) as f64 / cfg.pose_rate_hz;
        loop {
            let tc = cfg.command_phase + next_cmd as f64 / cfg.command_rate_hz;
            if tc > t_next || tc > duration {
                break;
            }
            let q = obs.pose;
            let (mx, my) = (q.x - anchor.0.x, q.y - anchor.0.y);
            if mx * mx + my * my > 0.05 * 0.05 || (q.theta - anchor.0.theta).abs() > 0.1 {
                anchor = (q, tc);
            }
            let reason = if arrived(&q, &target, cfg) {
                Some(ResetReason::Arrived)
            } else if tc - anchor.1 > cfg.stuck_timeout {
                Some(ResetReason::Stuck)
            } else {
                None
            };
            if let Some(reason) = reason {
                target = sample_target(&area, &mut target_rng);
                resets.push(TargetReset { t: tc, reason, target });
                anchor = (q, tc);
            }
            let (s_c, omega_c) = nav_controller(&q, &target, cfg);
            commands.push(Command::new(tc, s_c, omega_c));
            next_cmd += 1;
        }
        obs = oracle_step(&mut state, &commands, cfg, dt);
    }
    let meta =
        DatasetMeta { pose_rate_hz: cfg.pose_rate_hz, command_rate_hz: cfg.command_rate_hz, ..Default::default() };
    let dataset = Dataset::new(Trajectory::new(poses), commands, meta)?;
    Ok(Collection { dataset, latent: Trajectory::new(latent), resets })
}

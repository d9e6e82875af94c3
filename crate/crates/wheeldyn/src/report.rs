//! CSV emitters for reports, comparisons, training logs and plot data.

use std::path::Path;

use wheeldyn_core::eval::{Comparison, EvalReport};
use wheeldyn_core::training::TrainLog;
use wheeldyn_core::{Command, Dataset, Trajectory};

use crate::error::{IoError, Result};
use crate::io::{fmt_f64, read_table, write_file, write_table};

pub const REPORT_HEADER: [&str; 3] = ["length", "rmse_mm", "n_segments"];

pub fn write_report(path: &Path, r: &EvalReport) -> Result<()> {
    write_table(path, &REPORT_HEADER, r.rows.iter().map(|&(l, e, n)| [l as f64, e, n as f64]))
}

pub fn read_report(path: &Path, model: &str) -> Result<EvalReport> {
    let rows = read_table(path, &REPORT_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r[0] < 1.0 || r[0].fract() != 0.0 || r[2] < 0.0 || r[2].fract() != 0.0 || !(r[1] >= 0.0) {
            return Err(IoError::Parse { path: path.into(), row: i + 1, msg: "bad report row".into() });
        }
        out.push((r[0] as usize, r[1], r[2] as usize));
    }
    Ok(EvalReport { model: model.into(), rows: out })
}

/// `length,a_rmse_mm,b_rmse_mm,ratio,winner` with winner `a`, `b` or `tie`.
pub fn comparison_csv(rows: &[Comparison]) -> String {
    let mut s = String::from("length,a_rmse_mm,b_rmse_mm,ratio,winner\n");
    for c in rows {
        let w = if c.a < c.b {
            "a"
        } else if c.b < c.a {
            "b"
        } else {
            "tie"
        };
        s += &format!("{},{},{},{},{w}\n", c.length, fmt_f64(c.a), fmt_f64(c.b), fmt_f64(c.ratio));
    }
    s
}

pub fn write_comparison(path: &Path, rows: &[Comparison]) -> Result<()> {
    write_file(path, comparison_csv(rows).as_bytes())
}

/// Per-stage summary:
/// `length,epochs,updates,initial_val_rmse_mm,best_val_rmse_mm,stopped_early`.
pub fn write_stages(path: &Path, log: &TrainLog) -> Result<()> {
    let mut s = String::from("length,epochs,updates,initial_val_rmse_mm,best_val_rmse_mm,stopped_early\n");
    for st in &log.stages {
        s += &format!(
            "{},{},{},{},{},{}\n",
            st.length,
            st.epochs,
            st.updates,
            fmt_f64(st.initial_val),
            fmt_f64(st.best_val),
            st.stopped_early as u8
        );
    }
    write_file(path, s.as_bytes())
}

pub const CURVE_HEADER: [&str; 4] = ["update", "length", "train_loss", "val_rmse_mm"];

/// Training curve, one row per epoch, ordered by update count.
pub fn write_curve(path: &Path, log: &TrainLog) -> Result<()> {
    write_table(
        path,
        &CURVE_HEADER,
        log.curve.iter().map(|c| [c.update as f64, c.length as f64, c.train_loss, c.val_rmse]),
    )
}

/// Predicted against observed positions: `t,x_true,y_true,x_pred,y_pred`.
pub fn write_trajectory_compare(path: &Path, ds: &Dataset, k: usize, pred: &Trajectory) -> Result<()> {
    let rows = pred.points.iter().enumerate().map(|(i, p)| {
        let q = ds.poses.points[k + 1 + i].pose;
        [p.t, q.x, q.y, p.pose.x, p.pose.y]
    });
    write_table(path, &["t", "x_true", "y_true", "x_pred", "y_pred"], rows)
}

/// Per-step displacements in the robot frame of the previous pose, observed
/// and predicted: `t,dx_true,dy_true,dtheta_true,dx_pred,dy_pred,dtheta_pred`.
pub fn write_deltas(path: &Path, ds: &Dataset, k: usize, pred: &Trajectory) -> Result<()> {
    let local = |a: wheeldyn_core::Pose, b: wheeldyn_core::Pose| {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let (s, c) = a.theta.sin_cos();
        [c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta]
    };
    let mut prev_pred = ds.poses.points[k].pose;
    let mut rows = Vec::with_capacity(pred.len());
    for (i, p) in pred.points.iter().enumerate() {
        let t0 = ds.poses.points[k + i].pose;
        let t1 = ds.poses.points[k + i + 1].pose;
        let a = local(t0, t1);
        let b = local(prev_pred, p.pose);
        rows.push([p.t, a[0], a[1], a[2], b[0], b[1], b[2]]);
        prev_pred = p.pose;
    }
    write_table(path, &["t", "dx_true", "dy_true", "dtheta_true", "dx_pred", "dy_pred", "dtheta_pred"], rows)
}

/// Command scatter: `t,s_c,omega_c`, one row per command.
pub fn write_command_scatter(path: &Path, cmds: &[Command]) -> Result<()> {
    write_table(path, &["t", "s_c", "omega_c"], cmds.iter().map(|c| [c.t, c.s_c, c.omega_c]))
}

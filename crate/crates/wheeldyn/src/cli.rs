//! Command-line interface: `collect`, `train`, `eval`, `rollout`, `plot`
//! and `compare`.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use wheeldyn_core::analytical::RobotParams;
use wheeldyn_core::datagen::{collect, OracleConfig, Rect, ResetReason};
use wheeldyn_core::dataset::{split_dataset_blocks, DEFAULT_SPLIT_BLOCK};
use wheeldyn_core::ego::TransformMode;
use wheeldyn_core::eval::{compare_reports, rmse_by_length, rollout, DEFAULT_LENGTHS};
use wheeldyn_core::losses::{LossConfig, LossKind, DEFAULT_BAND};
use wheeldyn_core::models::{ModelKind, ModelSpec, RolloutWindow};
use wheeldyn_core::training::{
    fit_norm_stats, param_search, progressive_train, GradMode, SearchConfig, SearchStrategy, TrainConfig,
};
use wheeldyn_core::Dataset;

use crate::checkpoint;
use crate::config::{pick, KeyValues};
use crate::error::IoError;
use crate::io::{self, fmt_f64, load_dataset, save_dataset, write_file, write_poses};
use crate::manifest::RunManifest;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "wheeldyn", version, about = "Learned wheeled-robot dynamics: collect data, train, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
    /// Maximum worker threads (work is currently single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Cmd {
    /// Generate a synthetic dataset with the simulated robot.
    Collect(CollectArgs),
    /// Train a model (or search robot parameters for `paramonly`).
    Train(TrainArgs),
    /// RMSE-by-length report of a model on a dataset.
    Eval(EvalArgs),
    /// Write one predicted trajectory.
    Rollout(RolloutArgs),
    /// Write plot data as CSV.
    Plot(PlotArgs),
    /// Compare two evaluation reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Seconds of data to record.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overwrite an existing dataset.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub pose_noise: Option<f64>,
    #[arg(long)]
    pub slip_noise: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
}

/// Which part of a block split to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    All,
    Train,
    Test,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    /// Fraction of time blocks held out as the test set.
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Seconds per split block.
    #[arg(long, default_value_t = DEFAULT_SPLIT_BLOCK)]
    pub split_block: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the checkpoint, logs and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// lr, mlp, formulated+mlp, mlp+formulated or paramonly.
    #[arg(long)]
    pub kind: Option<String>,
    /// none, translational or egocentric.
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train on this part of the split (`all` uses every block).
    #[arg(long, value_enum, default_value_t = Part::Train)]
    pub part: Part,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub start_len: Option<usize>,
    /// mse, egomse, chamfer or gapped.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gap: Option<usize>,
    #[arg(long)]
    pub theta_weight: Option<f64>,
    /// raw, normalized or clipped:<c>.
    #[arg(long)]
    pub grad_mode: Option<String>,
    #[arg(long)]
    pub bptt: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub epochs_cap: Option<usize>,
    #[arg(long)]
    pub max_batch_steps: Option<usize>,
    #[arg(long)]
    pub val_segments: Option<usize>,
    /// Fraction of training blocks used for validation.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pose history length H.
    #[arg(long)]
    pub history_len: Option<usize>,
    /// Command window span T in seconds.
    #[arg(long)]
    pub span: Option<f64>,
    /// Command bins K.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Evaluations for `paramonly`.
    #[arg(long)]
    pub budget: Option<usize>,
    /// random or coordinate.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Rollout length of the `paramonly` objective.
    #[arg(long)]
    pub search_len: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Checkpoint file.
    #[arg(long, conflicts_with = "baseline")]
    pub model: Option<PathBuf>,
    /// Use the untuned formulated model instead of a checkpoint.
    #[arg(long)]
    pub baseline: bool,
    /// Frame transform of the baseline; must match a checkpoint if given.
    #[arg(long)]
    pub transform: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Part::Test)]
    pub part: Part,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Comma-separated horizons in steps.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long, default_value_t = 256)]
    pub max_segments: usize,
    /// Seconds of run history required before a segment start.
    #[arg(long, default_value_t = 1.5)]
    pub history: f64,
    /// Report CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Index of the initial observed pose.
    #[arg(long)]
    pub start: usize,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// t,x_true,y_true,x_pred,y_pred
    Trajectory,
    /// Per-step local displacements, observed and predicted.
    Deltas,
    /// Training curve from a `train` output directory.
    Curve,
    /// t,s_c,omega_c for every command.
    Commands,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `train` output directory (curve plots).
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    #[arg(long, default_value_t = 512)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Comparison CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    IoError::Usage(msg.into()).into()
}

fn load_config(path: Option<&Path>, allowed: &[&str]) -> Result<Option<KeyValues>> {
    let Some(p) = path else { return Ok(None) };
    let kv = KeyValues::load(p)?;
    kv.check_keys(allowed)?;
    Ok(Some(kv))
}

fn parse_with<T>(
    v: Option<String>,
    kv: Option<&KeyValues>,
    key: &str,
    default: &str,
    f: impl Fn(&str) -> Option<T>,
) -> Result<T> {
    let s = pick(v, kv, key, default.to_string())?;
    f(&s).ok_or_else(|| usage(format!("invalid {key} `{s}`")))
}

/// Runs a parsed command line.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let mut m = RunManifest::new(argv);
    m.set("jobs", cli.jobs);
    match cli.cmd {
        Cmd::Collect(a) => cmd_collect(a, m),
        Cmd::Train(a) => cmd_train(a, m),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Rollout(a) => cmd_rollout(a),
        Cmd::Plot(a) => cmd_plot(a),
        Cmd::Compare(a) => cmd_compare(a),
    }
}

const COLLECT_KEYS: &[&str] = &[
    "duration",
    "seed",
    "pose_noise_std",
    "heading_noise_std",
    "slip_noise_std",
    "pose_rate_hz",
    "command_rate_hz",
    "command_phase",
    "s_max",
    "omega_max",
    "stuck_timeout",
    "arrive_dist",
    "arrive_angle",
    "area_x0",
    "area_y0",
    "area_x1",
    "area_y1",
    "target_margin",
    "true.r",
    "true.r_half",
    "true.tau_s",
    "true.tau_w",
    "true.slip_gain_s",
    "true.slip_gain_w",
    "true.cmd_latency",
];

fn cmd_collect(a: CollectArgs, mut m: RunManifest) -> Result<()> {
    let kv = load_config(a.config.as_deref(), COLLECT_KEYS)?;
    let kv = kv.as_ref();
    let d = OracleConfig::default();
    let duration = pick(a.duration, kv, "duration", 2000.0)?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(usage("--duration must be positive"));
    }
    let tp = d.true_params;
    let true_params = RobotParams {
        r: pick(None, kv, "true.r", tp.r)?,
        r_half: pick(None, kv, "true.r_half", tp.r_half)?,
        tau_s: pick(None, kv, "true.tau_s", tp.tau_s)?,
        tau_w: pick(None, kv, "true.tau_w", tp.tau_w)?,
        slip_gain_s: pick(None, kv, "true.slip_gain_s", tp.slip_gain_s)?,
        slip_gain_w: pick(None, kv, "true.slip_gain_w", tp.slip_gain_w)?,
        cmd_latency: pick(None, kv, "true.cmd_latency", tp.cmd_latency)?,
    };
    let cfg = OracleConfig {
        true_params,
        slip_noise_std: pick(a.slip_noise, kv, "slip_noise_std", d.slip_noise_std)?,
        pose_noise_std: pick(a.pose_noise, kv, "pose_noise_std", d.pose_noise_std)?,
        heading_noise_std: pick(None, kv, "heading_noise_std", d.heading_noise_std)?,
        pose_rate_hz: pick(None, kv, "pose_rate_hz", d.pose_rate_hz)?,
        command_rate_hz: pick(None, kv, "command_rate_hz", d.command_rate_hz)?,
        command_phase: pick(None, kv, "command_phase", d.command_phase)?,
        safe_area: Rect {
            x0: pick(None, kv, "area_x0", d.safe_area.x0)?,
            y0: pick(None, kv, "area_y0", d.safe_area.y0)?,
            x1: pick(None, kv, "area_x1", d.safe_area.x1)?,
            y1: pick(None, kv, "area_y1", d.safe_area.y1)?,
        },
        target_margin: pick(None, kv, "target_margin", d.target_margin)?,
        s_max: pick(a.s_max, kv, "s_max", d.s_max)?,
        omega_max: pick(a.omega_max, kv, "omega_max", d.omega_max)?,
        stuck_timeout: pick(None, kv, "stuck_timeout", d.stuck_timeout)?,
        arrive_dist: pick(None, kv, "arrive_dist", d.arrive_dist)?,
        arrive_angle: pick(None, kv, "arrive_angle", d.arrive_angle)?,
        seed: pick(a.seed, kv, "seed", d.seed)?,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.out.join(io::POSES_FILE).exists() && !a.force {
        return Err(usage(format!("{} already holds a dataset; pass --force to overwrite", a.out.display())));
    }
    m.seed("oracle", cfg.seed);
    m.set("duration", fmt_f64(duration));
    m.set("oracle", format!("{cfg:?}"));
    let c = collect(&cfg, duration)?;
    save_dataset(&a.out, &c.dataset)?;
    write_poses(&a.out.join(io::LATENT_FILE), &c.latent)?;
    let mut resets = String::from("t,reason,x,y,theta\n");
    for r in &c.resets {
        let why = match r.reason {
            ResetReason::Arrived => "arrived",
            ResetReason::Stuck => "stuck",
        };
        resets += &format!(
            "{},{why},{},{},{}\n",
            fmt_f64(r.t),
            fmt_f64(r.target.x),
            fmt_f64(r.target.y),
            fmt_f64(r.target.theta)
        );
    }
    write_file(&a.out.join("resets.csv"), resets.as_bytes())?;
    m.result("poses", c.dataset.len());
    m.result("commands", c.dataset.commands.len());
    m.result("target_resets", c.resets.len().saturating_sub(1));
    for f in [io::POSES_FILE, io::COMMANDS_FILE, io::META_FILE, io::LATENT_FILE, "resets.csv"] {
        m.output(&a.out.join(f));
    }
    m.write(&a.out.join("manifest.txt"))?;
    Ok(())
}

fn split_part(ds: Dataset, part: Part, s: &SplitArgs) -> Result<Dataset> {
    if part == Part::All {
        return Ok(ds);
    }
    if !(s.test_fraction > 0.0 && s.test_fraction < 1.0) {
        return Err(usage("--test-fraction must lie in (0, 1)"));
    }
    let (train, test) = split_dataset_blocks(&ds, s.test_fraction, s.split_seed, s.split_block)?;
    Ok(if part == Part::Train { train } else { test })
}

const TRAIN_KEYS: &[&str] = &[
    "kind",
    "transform",
    "max_len",
    "start_len",
    "loss",
    "alpha",
    "gap",
    "theta_weight",
    "grad_mode",
    "bptt",
    "batch",
    "lr",
    "gamma",
    "l2",
    "patience",
    "eval_every",
    "epochs_cap",
    "max_batch_steps",
    "val_segments",
    "val_fraction",
    "seed",
    "history_len",
    "span",
    "bins",
    "budget",
    "strategy",
    "search_len",
];

fn cmd_train(a: TrainArgs, mut m: RunManifest) -> Result<()> {
    let kv = load_config(a.config.as_deref(), TRAIN_KEYS)?;
    let kv = kv.as_ref();
    let kind = parse_with(a.kind, kv, "kind", "formulated+mlp", ModelKind::parse)?;
    let transform = parse_with(a.transform, kv, "transform", "egocentric", TransformMode::parse)?;
    let dw = RolloutWindow::default();
    let window = RolloutWindow {
        history: pick(a.history_len, kv, "history_len", dw.history)?,
        span: pick(a.span, kv, "span", dw.span)?,
        bins: pick(a.bins, kv, "bins", dw.bins)?,
    };
    window.validate().map_err(|e| usage(e.to_string()))?;
    let seed = pick(a.seed, kv, "seed", 0u64)?;
    m.seed("train", seed);
    m.seed("split", a.split.split_seed);
    m.set("kind", kind.name());
    m.set("transform", transform.name());
    m.set("window", format!("{window:?}"));
    m.set("part", format!("{:?}", a.part));
    m.set("test_fraction", fmt_f64(a.split.test_fraction));
    m.set("split_block", fmt_f64(a.split.split_block));
    let ds = load_dataset(&a.data)?;
    let train = split_part(ds, a.part, &a.split)?;
    let mut spec = ModelSpec::new(kind, transform, window, RobotParams::default(), seed)?;

    if kind == ModelKind::ParamOnly {
        let d = SearchConfig::default();
        let cfg = SearchConfig {
            budget: pick(a.budget, kv, "budget", d.budget)?,
            strategy: parse_with(a.strategy, kv, "strategy", d.strategy.name(), SearchStrategy::parse)?,
            seed,
            ..d
        };
        let len = pick(a.search_len, kv, "search_len", 64usize)?;
        m.set("budget", cfg.budget);
        m.set("strategy", cfg.strategy.name());
        m.set("search_len", len);
        let res = param_search(&spec, &cfg, &train, len)?;
        spec.robot = res.best;
        m.result("best_rmse_mm", fmt_f64(res.best_rmse));
        m.result("evaluations", res.history.len());
        let mut s = String::from("eval,r,r_half,tau_s,tau_w,slip_gain_s,slip_gain_w,cmd_latency,rmse_mm\n");
        for (i, (x, f)) in res.history.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            s += &format!("{},{},{}\n", i + 1, xs.join(","), fmt_f64(*f));
        }
        write_file(&a.out.join("search.csv"), s.as_bytes())?;
        m.output(&a.out.join("search.csv"));
    } else {
        let d = TrainConfig::default();
        let loss_kind = parse_with(a.loss, kv, "loss", LossKind::EgoMse.name(), LossKind::parse)?;
        let theta_default = if loss_kind == LossKind::Chamfer { 0.0 } else { d.loss.theta_weight };
        let loss = LossConfig {
            kind: loss_kind,
            alpha: pick(a.alpha, kv, "alpha", d.loss.alpha)?,
            gap: pick(a.gap, kv, "gap", d.loss.gap)?,
            l2: pick(a.l2, kv, "l2", d.loss.l2)?,
            theta_weight: pick(a.theta_weight, kv, "theta_weight", theta_default)?,
            band: if loss_kind == LossKind::Chamfer { Some(DEFAULT_BAND) } else { None },
            scale: d.loss.scale,
        };
        let cfg = TrainConfig {
            initial_lr: pick(a.lr, kv, "lr", d.initial_lr)?,
            gamma: pick(a.gamma, kv, "gamma", d.gamma)?,
            batch_size: pick(a.batch, kv, "batch", d.batch_size)?,
            patience: pick(a.patience, kv, "patience", d.patience)?,
            start_length: pick(a.start_len, kv, "start_len", d.start_length)?,
            max_length: pick(a.max_len, kv, "max_len", d.max_length)?,
            grad_mode: parse_with(a.grad_mode, kv, "grad_mode", "raw", GradMode::parse)?,
            bptt_truncate: pick(a.bptt, kv, "bptt", d.bptt_truncate)?,
            seed,
            loss,
            eval_every: pick(a.eval_every, kv, "eval_every", d.eval_every)?,
            max_epochs_per_stage: pick(a.epochs_cap, kv, "epochs_cap", d.max_epochs_per_stage)?,
            max_batch_steps: pick(a.max_batch_steps, kv, "max_batch_steps", d.max_batch_steps)?,
            val_segments: pick(a.val_segments, kv, "val_segments", d.val_segments)?,
            ..d
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        let val_fraction = pick(a.val_fraction, kv, "val_fraction", 0.15)?;
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(usage("--val-fraction must lie in (0, 1)"));
        }
        m.set("train_config", format!("{cfg:?}"));
        m.set("val_fraction", fmt_f64(val_fraction));
        let (tr, val) = split_dataset_blocks(&train, val_fraction, seed ^ 0x7a1d, a.split.split_block)?;
        fit_norm_stats(&mut spec, &tr, cfg.history)?;
        let (out, log) = progressive_train(&spec, &tr, &val, &cfg)?;
        spec = out;
        for st in &log.stages {
            m.result(
                &format!("stage.{}", st.length),
                format!(
                    "epochs={} updates={} initial_val_rmse_mm={} best_val_rmse_mm={}",
                    st.epochs,
                    st.updates,
                    fmt_f64(st.initial_val),
                    fmt_f64(st.best_val)
                ),
            );
        }
        report::write_stages(&a.out.join("stages.csv"), &log)?;
        report::write_curve(&a.out.join("curve.csv"), &log)?;
        m.output(&a.out.join("stages.csv"));
        m.output(&a.out.join("curve.csv"));
    }
    let ck = a.out.join("model.ckpt");
    checkpoint::save(&ck, &spec)?;
    m.output(&ck);
    m.write(&a.out.join("manifest.txt"))?;
    Ok(())
}

fn load_model(a: &ModelArgs) -> Result<ModelSpec> {
    let transform = a
        .transform
        .as_deref()
        .map(|t| TransformMode::parse(t).ok_or_else(|| usage(format!("invalid transform `{t}`"))))
        .transpose()?;
    match (&a.model, a.baseline) {
        (Some(p), false) => {
            let spec = checkpoint::load(p)?;
            if let Some(t) = transform {
                if t != spec.transform {
                    return Err(usage(format!(
                        "checkpoint uses the {} transform, not {}",
                        spec.transform.name(),
                        t.name()
                    )));
                }
            }
            Ok(spec)
        }
        (None, true) => Ok(ModelSpec::new(
            ModelKind::ParamOnly,
            transform.unwrap_or(TransformMode::Egocentric),
            RolloutWindow::default(),
            RobotParams::default(),
            0,
        )?),
        _ => Err(usage("pass exactly one of --model or --baseline")),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let spec = load_model(&a.model)?;
    let lengths = a.lengths.unwrap_or_else(|| DEFAULT_LENGTHS.to_vec());
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(usage("--lengths must be positive"));
    }
    let mut lengths = lengths;
    lengths.sort_unstable();
    lengths.dedup();
    let ds = load_dataset(&a.data)?;
    let ds = split_part(ds, a.part, &a.split)?;
    let r = rmse_by_length(&spec, &ds, &lengths, a.max_segments, a.history)?;
    for l in &lengths {
        if r.rmse_at(*l).is_none() {
            eprintln!("note: length {l} does not fit the data and was skipped");
        }
    }
    match a.out {
        Some(p) => report::write_report(&p, &r)?,
        None => {
            println!("{}", report::REPORT_HEADER.join(","));
            for (l, e, n) in &r.rows {
                println!("{l},{},{n}", fmt_f64(*e));
            }
        }
    }
    Ok(())
}

fn checked_rollout(spec: &ModelSpec, ds: &Dataset, start: usize, steps: usize) -> Result<wheeldyn_core::Trajectory> {
    if steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    if start + steps >= ds.len() {
        return Err(usage(format!("start {start} plus {steps} steps exceeds the {} poses", ds.len())));
    }
    Ok(rollout(spec, ds, start, steps)?)
}

fn cmd_rollout(a: RolloutArgs) -> Result<()> {
    let spec = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let traj = checked_rollout(&spec, &ds, a.start, a.steps)?;
    write_poses(&a.out, &traj)?;
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let need_data = || a.data.as_ref().ok_or_else(|| usage("--data is required for this plot"));
    match a.kind {
        PlotKind::Commands => {
            let ds = load_dataset(need_data()?)?;
            report::write_command_scatter(&a.out, &ds.commands)?;
        }
        PlotKind::Curve => {
            let run = a.run.as_ref().ok_or_else(|| usage("--run is required for curve plots"))?;
            let rows = io::read_table(&run.join("curve.csv"), &report::CURVE_HEADER)?;
            let mut rows = rows;
            rows.sort_by(|x, y| x[0].total_cmp(&y[0]));
            io::write_table(&a.out, &report::CURVE_HEADER, rows)?;
        }
        PlotKind::Trajectory | PlotKind::Deltas => {
            let spec = load_model(&a.model)?;
            let ds = load_dataset(need_data()?)?;
            let traj = checked_rollout(&spec, &ds, a.start, a.steps)?;
            if a.kind == PlotKind::Trajectory {
                report::write_trajectory_compare(&a.out, &ds, a.start, &traj)?;
            } else {
                report::write_deltas(&a.out, &ds, a.start, &traj)?;
            }
        }
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let ra = report::read_report(&a.a, "a")?;
    let rb = report::read_report(&a.b, "b")?;
    let la: Vec<usize> = ra.rows.iter().map(|r| r.0).collect();
    let lb: Vec<usize> = rb.rows.iter().map(|r| r.0).collect();
    if la != lb {
        return Err(IoError::Format { path: a.b.clone(), msg: "reports cover different lengths".into() }.into());
    }
    let rows = compare_reports(&ra, &rb);
    match a.out {
        Some(p) => report::write_comparison(&p, &rows)?,
        None => print!("{}", report::comparison_csv(&rows)),
    }
    Ok(())
}

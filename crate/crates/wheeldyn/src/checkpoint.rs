//! Versioned plain-text model checkpoints.
//!
//! ```text
//! wheeldyn-checkpoint 1
//! kind=mlp
//! transform=egocentric
//! history=1
//! span=0.2
//! bins=5
//! warmup=1
//! input_dim=15
//! output_dim=3
//! robot=0.1 0.25 0.1 0.1 1 1 0
//! feat_mean=...
//! feat_scale=...
//! out_mean=...
//! out_scale=...
//! param=mlp.l0.w 32 15 learnable
//! 0.01 -0.2 ...
//! ```
//!
//! Numbers use shortest round-trip form, so save(load(save(m))) is
//! byte-identical to save(m).

use std::fs;
use std::path::Path;

use wheeldyn_core::analytical::RobotParams;
use wheeldyn_core::autodiff::ParamVector;
use wheeldyn_core::ego::TransformMode;
use wheeldyn_core::models::{ModelKind, ModelSpec, NormStats, RolloutWindow};

use crate::error::{IoError, Result};
use crate::io::{fmt_f64, write_file};

pub const MAGIC: &str = "wheeldyn-checkpoint";
pub const VERSION: u32 = 1;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

/// Serializes a model.
pub fn to_text(spec: &ModelSpec) -> String {
    let mut s = format!("{MAGIC} {VERSION}\n");
    let w = &spec.window;
    s += &format!("kind={}\ntransform={}\n", spec.kind.name(), spec.transform.name());
    s +=
        &format!("history={}\nspan={}\nbins={}\nwarmup={}\n", w.history, fmt_f64(w.span), w.bins, fmt_f64(spec.warmup));
    s += &format!("input_dim={}\noutput_dim={}\n", spec.input_dim(), spec.output_dim());
    s += &format!("robot={}\n", join(&spec.robot.to_array()));
    let n = &spec.norm;
    s += &format!("feat_mean={}\nfeat_scale={}\n", join(&n.feat_mean), join(&n.feat_scale));
    s += &format!("out_mean={}\nout_scale={}\n", join(&n.out_mean), join(&n.out_scale));
    for seg in spec.params.layout() {
        let kind = if seg.learnable { "learnable" } else { "state" };
        s += &format!("param={} {} {} {}\n", seg.name, seg.rows, seg.cols, kind);
        s += &join(&spec.params.values[seg.range()]);
        s.push('\n');
    }
    s
}

pub fn save(path: &Path, spec: &ModelSpec) -> Result<()> {
    write_file(path, to_text(spec).as_bytes())
}

pub fn load(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    from_text(&text, path)
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    row: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> IoError {
        IoError::Parse { path: self.path.into(), row: self.row, msg: msg.into() }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        let (i, l) = self.it.next()?;
        self.row = i + 1;
        Some(l)
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next_line().ok_or_else(|| self.err(format!("missing `{key}`")))?;
        match l.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key}=...`, found `{l}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn floats(&self, v: &str) -> Result<Vec<f64>> {
        v.split_whitespace().map(|x| x.parse::<f64>().map_err(|_| self.err(format!("`{x}` is not a number")))).collect()
    }

    fn vector(&mut self, key: &str) -> Result<Vec<f64>> {
        let v = self.field(key)?;
        self.floats(v)
    }
}

/// Parses checkpoint text; `path` is used for error messages.
pub fn from_text(text: &str, path: &Path) -> Result<ModelSpec> {
    let mut ln = Lines { it: text.lines().enumerate(), path, row: 0 };
    let head = ln.next_line().unwrap_or("");
    match head.split_once(' ') {
        Some((m, v)) if m == MAGIC => {
            if v.parse::<u32>().ok() != Some(VERSION) {
                return Err(ln.err(format!("unsupported checkpoint version `{v}`")));
            }
        }
        _ => return Err(ln.err("not a wheeldyn checkpoint")),
    }
    let kind_s = ln.field("kind")?;
    let kind = ModelKind::parse(kind_s).ok_or_else(|| ln.err(format!("unknown model kind `{kind_s}`")))?;
    let tr_s = ln.field("transform")?;
    let transform = TransformMode::parse(tr_s).ok_or_else(|| ln.err(format!("unknown transform `{tr_s}`")))?;
    let window = RolloutWindow { history: ln.parse("history")?, span: ln.parse("span")?, bins: ln.parse("bins")? };
    let warmup: f64 = ln.parse("warmup")?;
    let input_dim: usize = ln.parse("input_dim")?;
    let output_dim: usize = ln.parse("output_dim")?;
    let robot = ln.vector("robot")?;
    let robot: [f64; 7] = robot.try_into().map_err(|_| ln.err("robot needs 7 values"))?;
    let norm = NormStats {
        feat_mean: ln.vector("feat_mean")?,
        feat_scale: ln.vector("feat_scale")?,
        out_mean: ln.vector("out_mean")?,
        out_scale: ln.vector("out_scale")?,
    };
    if norm.feat_mean.len() != input_dim || norm.out_mean.len() != output_dim {
        return Err(ln.err("normalization dimensions disagree with the header"));
    }
    let mut params = ParamVector::new();
    while let Some(l) = ln.next_line() {
        if l.is_empty() {
            continue;
        }
        let Some(("param", desc)) = l.split_once('=') else {
            return Err(ln.err(format!("expected `param=...`, found `{l}`")));
        };
        let parts: Vec<&str> = desc.split_whitespace().collect();
        let [name, rows, cols, kind] = parts[..] else {
            return Err(ln.err("param needs name, rows, cols and kind"));
        };
        let rows: usize = rows.parse().map_err(|_| ln.err("bad row count"))?;
        let cols: usize = cols.parse().map_err(|_| ln.err("bad column count"))?;
        let learnable = match kind {
            "learnable" => true,
            "state" => false,
            _ => return Err(ln.err(format!("unknown parameter kind `{kind}`"))),
        };
        let values_line = ln.next_line().ok_or_else(|| ln.err("missing parameter values"))?;
        let values = ln.floats(values_line)?;
        if values.len() != rows * cols {
            return Err(ln.err(format!("segment {name} needs {} values, found {}", rows * cols, values.len())));
        }
        let off = params.push_segment(name, rows, cols, learnable);
        params.values[off..off + values.len()].copy_from_slice(&values);
    }
    Ok(ModelSpec::from_parts(kind, transform, window, RobotParams::from_array(robot), params, norm, warmup)?)
}

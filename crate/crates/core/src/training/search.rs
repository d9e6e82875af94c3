use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytical::RobotParams;
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::eval::rmse_by_length;
use crate::models::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    /// Independent uniform samples from the ranges.
    Random,
    /// Cyclic golden-section line searches, one parameter at a time, then
    /// one along the cycle's net move. Each parameter's interval tracks
    /// twice its last move and at least halves when it stalls.
    Coordinate,
}

impl SearchStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SearchStrategy::Random => "random",
            SearchStrategy::Coordinate => "coordinate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(SearchStrategy::Random),
            "coordinate" => Some(SearchStrategy::Coordinate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Objective evaluations.
    pub budget: usize,
    /// Closed interval per parameter, in [`RobotParams::NAMES`] order.
    pub ranges: [(f64, f64); 7],
    pub strategy: SearchStrategy,
    pub seed: u64,
    /// Validation segments per evaluation.
    pub segments: usize,
    /// Objective evaluations per line search (coordinate strategy).
    pub line_evals: usize,
    /// Fraction of the budget spent on uniform samples before the
    /// coordinate strategy refines the best one.
    pub explore: f64,
    /// Seconds of run history required before a segment start.
    pub history: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let d = RobotParams::default();
        SearchConfig {
            budget: 500,
            ranges: [(d.r, d.r), (d.r_half, d.r_half), (0.0, 0.5), (0.0, 0.5), (0.5, 1.5), (0.5, 1.5), (0.0, 0.2)],
            strategy: SearchStrategy::Coordinate,
            seed: 0,
            segments: 64,
            line_evals: 10,
            explore: 0.3,
            history: 1.5,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.segments == 0 {
            return Err(invalid!("search budget and segment count must be positive"));
        }
        for (i, (lo, hi)) in self.ranges.iter().enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid!("empty range for {}", RobotParams::NAMES[i]));
            }
        }
        if !(0.0..1.0).contains(&self.explore) {
            return Err(invalid!("explore fraction must lie in [0, 1)"));
        }
        if self.strategy == SearchStrategy::Coordinate && self.line_evals < 2 {
            return Err(invalid!("line searches need at least two evaluations"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: RobotParams,
    /// Mean rollout RMSE (mm) of `best`.
    pub best_rmse: f64,
    /// Every evaluated candidate with its objective, in order.
    pub history: Vec<([f64; 7], f64)>,
}

struct Objective<'a> {
    spec: ModelSpec,
    ds: &'a Dataset,
    length: usize,
    segments: usize,
    history: f64,
    seen: Vec<([f64; 7], f64)>,
    budget: usize,
}

impl Objective<'_> {
    fn exhausted(&self) -> bool {
        self.seen.len() >= self.budget
    }

    fn eval(&mut self, x: [f64; 7]) -> Result<f64> {
        let p = RobotParams::from_array(x);
        let f = if p.validate().is_ok() {
            self.spec.robot = p;
            match rmse_by_length(&self.spec, self.ds, &[self.length], self.segments, self.history) {
                Ok(r) => r.rows.first().map_or(f64::INFINITY, |row| row.1),
                Err(Error::NonFinite(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            }
        } else {
            f64::INFINITY
        };
        self.seen.push((x, f));
        Ok(f)
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Derivative-free fit of the formulated model's robot parameters by mean
/// rollout RMSE at `eval_length` on `ds`.
///
/// `base` supplies the window and warm-up of the parameter-only model.
pub fn param_search(base: &ModelSpec, cfg: &SearchConfig, ds: &Dataset, eval_length: usize) -> Result<SearchResult> {
    cfg.validate()?;
    let max_latency = cfg.ranges[6].1;
    // one start set for every candidate: cover the longest warm-up
    let history = cfg.history.max(base.warmup + max_latency).max(base.window.span);
    let mut spec = base.clone();
    if spec.kind != crate::models::ModelKind::ParamOnly {
        spec = ModelSpec::new(crate::models::ModelKind::ParamOnly, base.transform, base.window, base.robot, 0)?;
        spec.warmup = base.warmup;
    }
    let mut obj = Objective {
        spec,
        ds,
        length: eval_length,
        segments: cfg.segments,
        history,
        seen: Vec::new(),
        budget: cfg.budget,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sample = |rng: &mut ChaCha8Rng| {
        let mut x = [0.0; 7];
        for (i, (lo, hi)) in cfg.ranges.iter().enumerate() {
            x[i] = if hi > lo { rng.random_range(*lo..=*hi) } else { *lo };
        }
        x
    };
    match cfg.strategy {
        SearchStrategy::Random => {
            while !obj.exhausted() {
                let x = sample(&mut rng);
                obj.eval(x)?;
            }
        }
        SearchStrategy::Coordinate => {
            let mut x = [0.0; 7];
            for (i, (lo, hi)) in cfg.ranges.iter().enumerate() {
                x[i] = (lo + hi) / 2.0;
            }
            let mut fx = obj.eval(x)?;
            for _ in 1..(cfg.budget as f64 * cfg.explore) as usize {
                let y = sample(&mut rng);
                let fy = obj.eval(y)?;
                if fy < fx {
                    x = y;
                    fx = fy;
                }
            }
            let free: Vec<usize> = (0..7).filter(|&i| cfg.ranges[i].1 > cfg.ranges[i].0).collect();
            let mut step: Vec<f64> = cfg.ranges.iter().map(|(lo, hi)| (hi - lo) / 2.0).collect();
            while !obj.exhausted() && !free.is_empty() {
                let start = x;
                for &j in &free {
                    if obj.exhausted() {
                        break;
                    }
                    let mut dir = [0.0; 7];
                    dir[j] = 1.0;
                    let (y, fy) = golden(&mut obj, &cfg.ranges, x, dir, -step[j], step[j], cfg.line_evals)?;
                    let moved = if fy < fx { (y[j] - x[j]).abs() } else { 0.0 };
                    if fy < fx {
                        x = y;
                        fx = fy;
                    }
                    step[j] = (2.0 * moved).max(step[j] / 2.0);
                }
                let mut dir = [0.0; 7];
                for i in 0..7 {
                    dir[i] = x[i] - start[i];
                }
                if !obj.exhausted() && dir.iter().any(|d| *d != 0.0) {
                    let (y, fy) = golden(&mut obj, &cfg.ranges, x, dir, -1.0, 2.0, cfg.line_evals)?;
                    if fy < fx {
                        x = y;
                        fx = fy;
                    }
                }
            }
        }
    }
    let (bx, bf) =
        obj.seen.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).expect("budget >= 1 guarantees one evaluation");
    Ok(SearchResult { best: RobotParams::from_array(bx), best_rmse: bf, history: obj.seen })
}

/// Golden-section search over `x + t * dir` for `t` in `[a, b]`, clamped
/// to `ranges`; returns the best point it evaluated.
fn golden(
    obj: &mut Objective<'_>,
    ranges: &[(f64, f64); 7],
    x: [f64; 7],
    dir: [f64; 7],
    mut a: f64,
    mut b: f64,
    evals: usize,
) -> Result<([f64; 7], f64)> {
    let at = |t: f64| {
        let mut y = x;
        for i in 0..7 {
            y[i] = (x[i] + t * dir[i]).clamp(ranges[i].0, ranges[i].1);
        }
        y
    };
    let mut best = (x, f64::INFINITY);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = obj.eval(at(c))?;
    let mut fd = if obj.exhausted() { f64::INFINITY } else { obj.eval(at(d))? };
    for (t, f) in [(c, fc), (d, fd)] {
        if f < best.1 {
            best = (at(t), f);
        }
    }
    let mut used = 2;
    while used < evals && !obj.exhausted() {
        let t = if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = obj.eval(at(c))?;
            (c, fc)
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = obj.eval(at(d))?;
            (d, fd)
        };
        if t.1 < best.1 {
            best = (at(t.0), t.1);
        }
        used += 1;
    }
    Ok(best)
}

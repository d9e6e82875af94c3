//! The logged command/pose dataset and its train/test partitioning.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::types::{Command, Trajectory};

/// Default maximum ratio between a pose interval and the median interval
/// before the interval counts as a gap between recording runs.
pub const DEFAULT_JITTER_RATIO: f64 = 1.5;
/// Default split block length in seconds.
pub const DEFAULT_SPLIT_BLOCK: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub pose_rate_hz: f64,
    pub command_rate_hz: f64,
    pub units: String,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        DatasetMeta { pose_rate_hz: 60.0, command_rate_hz: 25.0, units: "m_rad_s".into() }
    }
}

/// Two asynchronous streams: poses at the capture rate and commands at the
/// controller rate.
///
/// A dataset may consist of several contiguous recording runs separated by
/// time gaps (a test split is one example); see [`Dataset::runs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub poses: Trajectory,
    pub commands: Vec<Command>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Validates and builds a dataset. Headings are unwrapped first.
    pub fn new(mut poses: Trajectory, commands: Vec<Command>, meta: DatasetMeta) -> Result<Self> {
        poses.unwrap_theta();
        let ds = Dataset { poses, commands, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.meta.pose_rate_hz > 0.0) || !(self.meta.command_rate_hz > 0.0) {
            return Err(invalid!("stream rates must be positive"));
        }
        if self.poses.is_empty() {
            return Err(Error::Data { stream: "poses", row: 0, msg: "empty stream".into() });
        }
        if self.commands.is_empty() {
            return Err(Error::Data { stream: "commands", row: 0, msg: "empty stream".into() });
        }
        self.poses.validate()?;
        for (i, c) in self.commands.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Data { stream: "commands", row: i + 1, msg: "non-finite field".into() });
            }
            if c.t < 0.0 {
                return Err(Error::Data { stream: "commands", row: i + 1, msg: "negative timestamp".into() });
            }
            if i > 0 && c.t <= self.commands[i - 1].t {
                return Err(Error::Data {
                    stream: "commands",
                    row: i + 1,
                    msg: alloc::format!("timestamp {} does not increase", c.t),
                });
            }
        }
        let (p0, p1) = self.pose_span();
        let (c0, c1) = (self.commands[0].t, self.commands[self.commands.len() - 1].t);
        if c0 > p1 || p0 > c1 {
            return Err(invalid!("pose and command time ranges do not overlap"));
        }
        let med = self.median_interval();
        if med > 0.0 {
            for (i, w) in self.poses.points.windows(2).enumerate() {
                let d = w[1].t - w[0].t;
                if d * DEFAULT_JITTER_RATIO < med {
                    return Err(Error::Data {
                        stream: "poses",
                        row: i + 2,
                        msg: alloc::format!("interval {d} far below median {med}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Nominal pose period, `1 / pose_rate_hz`.
    pub fn dt(&self) -> f64 {
        1.0 / self.meta.pose_rate_hz
    }

    pub fn pose_span(&self) -> (f64, f64) {
        let p = &self.poses.points;
        (p[0].t, p[p.len() - 1].t)
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.pose_span();
        b - a
    }

    pub fn median_interval(&self) -> f64 {
        let mut d: Vec<f64> = self.poses.points.windows(2).map(|w| w[1].t - w[0].t).collect();
        if d.is_empty() {
            return 0.0;
        }
        let mid = d.len() / 2;
        let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }

    /// Maximal index ranges of poses without a time gap (an interval larger
    /// than `jitter_ratio` times the median interval).
    pub fn runs_with(&self, jitter_ratio: f64) -> Vec<Range<usize>> {
        let n = self.poses.len();
        let med = self.median_interval();
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..n {
            let d = self.poses.points[i].t - self.poses.points[i - 1].t;
            if d > jitter_ratio * med {
                out.push(start..i);
                start = i;
            }
        }
        if n > 0 {
            out.push(start..n);
        }
        out
    }

    pub fn runs(&self) -> Vec<Range<usize>> {
        self.runs_with(DEFAULT_JITTER_RATIO)
    }

    /// Index of the last command issued at or before `t`.
    pub fn command_at(&self, t: f64) -> Option<usize> {
        let n = self.commands.partition_point(|c| c.t <= t);
        n.checked_sub(1)
    }

    /// Copy with every timestamp shifted by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Dataset {
        let mut d = self.clone();
        d.poses.points.iter_mut().for_each(|p| p.t += dt);
        d.commands.iter_mut().for_each(|c| c.t += dt);
        d
    }

    /// Sub-dataset of poses in `range` and the commands from `cmd_from`
    /// seconds up to the last pose time.
    pub fn slice(&self, range: Range<usize>, cmd_from: f64) -> Result<Dataset> {
        let poses = Trajectory::new(self.poses.points[range].to_vec());
        let t1 = poses.points.last().map(|p| p.t).unwrap_or(cmd_from);
        let commands = self.commands.iter().copied().filter(|c| c.t >= cmd_from && c.t <= t1).collect();
        Dataset::new(poses, commands, self.meta.clone())
    }
}

/// Partitions a dataset into `(train, test)` by contiguous time blocks of
/// [`DEFAULT_SPLIT_BLOCK`] seconds.
pub fn split_dataset(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split_dataset_blocks(ds, test_fraction, seed, DEFAULT_SPLIT_BLOCK)
}

/// Partitions a dataset into `(train, test)` by contiguous time blocks.
///
/// Blocks are `block_seconds` long, measured from the first pose. A seeded
/// shuffle picks `round(test_fraction * blocks)` of them (at least one for
/// each side) for the test set. Every pose and every command lands in exactly
/// one output, according to the block containing its timestamp.
pub fn split_dataset_blocks(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    block_seconds: f64,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid!("test fraction {test_fraction} outside (0, 1)"));
    }
    if !(block_seconds > 0.0) {
        return Err(invalid!("block length must be positive"));
    }
    let (t0, t1) = ds.pose_span();
    let n_blocks = (math::floor((t1 - t0) / block_seconds) as usize) + 1;
    if n_blocks < 2 {
        return Err(Error::Insufficient(alloc::format!(
            "{:.3} s of data holds fewer than two {block_seconds} s blocks",
            t1 - t0
        )));
    }
    let n_test = (math::round(test_fraction * n_blocks as f64) as usize).clamp(1, n_blocks - 1);
    let mut order: Vec<usize> = (0..n_blocks).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = alloc::vec![false; n_blocks];
    order[..n_test].iter().for_each(|&b| is_test[b] = true);

    let block_of = |t: f64| -> usize {
        let b = math::floor((t - t0) / block_seconds);
        (b.max(0.0) as usize).min(n_blocks - 1)
    };
    let (mut tr_p, mut te_p) = (Vec::new(), Vec::new());
    for p in &ds.poses.points {
        if is_test[block_of(p.t)] {
            te_p.push(*p)
        } else {
            tr_p.push(*p)
        }
    }
    let (mut tr_c, mut te_c) = (Vec::new(), Vec::new());
    for c in &ds.commands {
        if is_test[block_of(c.t)] {
            te_c.push(*c)
        } else {
            tr_c.push(*c)
        }
    }
    let train = Dataset::new(Trajectory::new(tr_p), tr_c, ds.meta.clone())?;
    let test = Dataset::new(Trajectory::new(te_p), te_c, ds.meta.clone())?;
    Ok((train, test))
}

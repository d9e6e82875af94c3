//! Dataset files: `poses.csv` (`t,x,y,theta`), `commands.csv`
//! (`t,s_c,omega_c`) and `meta.txt` (key=value).
//!
//! Floats are written in shortest round-trip form, so a write/read cycle
//! reproduces every value exactly.

use std::fs;
use std::path::Path;

use wheeldyn_core::{Command, Dataset, DatasetMeta, Pose, TimedPose, Trajectory};

use crate::config::KeyValues;
use crate::error::{IoError, Result};

pub const POSES_FILE: &str = "poses.csv";
pub const COMMANDS_FILE: &str = "commands.csv";
pub const META_FILE: &str = "meta.txt";
pub const LATENT_FILE: &str = "latent_poses.csv";

const POSE_HEADER: [&str; 4] = ["t", "x", "y", "theta"];
const COMMAND_HEADER: [&str; 3] = ["t", "s_c", "omega_c"];

/// Reads a numeric CSV with the exact header `header`.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let found = rdr.headers().map_err(|e| csv_error(path, 0, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::Format {
            path: path.into(),
            msg: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, row, e))?;
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| IoError::Parse {
                    path: path.into(),
                    row,
                    msg: format!("`{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != header.len() {
            return Err(IoError::Parse { path: path.into(), row, msg: format!("expected {} fields", header.len()) });
        }
        rows.push(vals);
    }
    Ok(rows)
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IoError::io(path, source),
        other => IoError::Parse { path: path.into(), row, msg: format!("{other:?}") },
    }
}

/// Writes a CSV with the given header; numbers use shortest round-trip form.
pub fn write_table<R: AsRef<[f64]>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let mut first = true;
        for v in r.as_ref() {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes).map_err(|e| IoError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| IoError::io(path, e))
}

pub fn read_poses(path: &Path) -> Result<Trajectory> {
    let rows = read_table(path, &POSE_HEADER)?;
    Ok(Trajectory::new(rows.into_iter().map(|r| TimedPose { t: r[0], pose: Pose::new(r[1], r[2], r[3]) }).collect()))
}

pub fn write_poses(path: &Path, traj: &Trajectory) -> Result<()> {
    write_table(path, &POSE_HEADER, traj.points.iter().map(|p| [p.t, p.pose.x, p.pose.y, p.pose.theta]))
}

pub fn read_commands(path: &Path) -> Result<Vec<Command>> {
    let rows = read_table(path, &COMMAND_HEADER)?;
    Ok(rows.into_iter().map(|r| Command::new(r[0], r[1], r[2])).collect())
}

pub fn write_commands(path: &Path, cmds: &[Command]) -> Result<()> {
    write_table(path, &COMMAND_HEADER, cmds.iter().map(|c| [c.t, c.s_c, c.omega_c]))
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let kv = KeyValues::load(path)?;
    let d = DatasetMeta::default();
    Ok(DatasetMeta {
        pose_rate_hz: kv.get("pose_rate_hz")?.unwrap_or(d.pose_rate_hz),
        command_rate_hz: kv.get("command_rate_hz")?.unwrap_or(d.command_rate_hz),
        units: kv.get::<String>("units")?.unwrap_or(d.units),
    })
}

pub fn write_meta(path: &Path, meta: &DatasetMeta) -> Result<()> {
    let text = format!(
        "pose_rate_hz={}\ncommand_rate_hz={}\nunits={}\n",
        fmt_f64(meta.pose_rate_hz),
        fmt_f64(meta.command_rate_hz),
        meta.units
    );
    write_file(path, text.as_bytes())
}

/// Loads a dataset directory. Without `meta.txt` the pose rate is taken
/// from the median pose interval.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let poses = read_poses(&dir.join(POSES_FILE))?;
    let commands = read_commands(&dir.join(COMMANDS_FILE))?;
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        read_meta(&meta_path)?
    } else {
        let mut m = DatasetMeta::default();
        let mut d: Vec<f64> = poses.points.windows(2).map(|w| w[1].t - w[0].t).collect();
        if !d.is_empty() {
            d.sort_by(f64::total_cmp);
            let med = d[d.len() / 2];
            if med > 0.0 {
                m.pose_rate_hz = 1.0 / med;
            }
        }
        m
    };
    Ok(Dataset::new(poses, commands, meta)?)
}

pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    write_poses(&dir.join(POSES_FILE), &ds.poses)?;
    write_commands(&dir.join(COMMANDS_FILE), &ds.commands)?;
    write_meta(&dir.join(META_FILE), &ds.meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2000.0 + 1.0 / 60.0, -1e-300, 123456.789e10] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("poses.csv");
        fs::write(&p, "t,x,y\n0,0,0\n").unwrap();
        assert!(matches!(read_poses(&p), Err(IoError::Format { .. })));
    }

    #[test]
    fn parse_error_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("commands.csv");
        fs::write(&p, "t,s_c,omega_c\n0,0,0\n0.1,abc,0\n").unwrap();
        match read_commands(&p) {
            Err(IoError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }
}

//! Plain-text run manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::write_file;

/// Version string recorded in manifests.
pub const VERSION: &str = concat!("wheeldyn ", env!("CARGO_PKG_VERSION"));

/// What a run did and how to reproduce it.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seeds: Vec<(String, u64)>,
    /// Resolved settings in the order they were applied.
    pub config: Vec<(String, String)>,
    /// Free-form results (per-stage losses, counts).
    pub results: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        RunManifest {
            command,
            seeds: Vec::new(),
            config: Vec::new(),
            results: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, v: u64) {
        self.seeds.push((name.into(), v));
    }

    pub fn set(&mut self, key: &str, v: impl ToString) {
        self.config.push((key.into(), v.to_string()));
    }

    pub fn result(&mut self, key: &str, v: impl ToString) {
        self.results.push((key.into(), v.to_string()));
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.into());
    }

    fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of the resolved configuration.
    pub fn config_hash(&self) -> String {
        let d = Sha256::digest(self.config_text().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s += &format!("version={VERSION}\n");
        s += &format!("command={}\n", self.command.join(" "));
        for (k, v) in &self.seeds {
            s += &format!("seed.{k}={v}\n");
        }
        s += &format!("config_sha256={}\n", self.config_hash());
        for (k, v) in &self.config {
            s += &format!("config.{k}={v}\n");
        }
        for (k, v) in &self.results {
            s += &format!("result.{k}={v}\n");
        }
        for p in &self.outputs {
            s += &format!("output={}\n", p.display());
        }
        s += &format!("wall_clock_s={:.3}\n", self.started.elapsed().as_secs_f64());
        s
    }

    /// Writes the manifest atomically.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_config_only() {
        let mut a = RunManifest::new(vec!["x".into()]);
        a.set("seed", 1);
        let mut b = RunManifest::new(vec!["y".into()]);
        b.set("seed", 1);
        assert_eq!(a.config_hash(), b.config_hash());
        b.set("lr", 0.1);
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        assert!(a.render().contains("config.seed=1"));
    }
}

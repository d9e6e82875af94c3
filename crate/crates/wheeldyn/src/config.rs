//! Plain `key=value` files: one pair per line, `#` starts a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{IoError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `text`; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(IoError::Parse {
                    path: origin.into(),
                    row: i + 1,
                    msg: format!("expected key=value, found `{line}`"),
                });
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(IoError::Parse { path: origin.into(), row: i + 1, msg: "empty key".into() });
            }
            if entries.insert(k.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(IoError::Parse { path: origin.into(), row: i + 1, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(KeyValues { path: origin.into(), entries })
    }

    /// Typed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((row, v)) => v.parse().map(Some).map_err(|_| IoError::Parse {
                path: self.path.clone(),
                row: *row,
                msg: format!("cannot parse `{v}` for `{key}`"),
            }),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, (row, _)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(IoError::Parse { path: self.path.clone(), row: *row, msg: format!("unknown key `{k}`") });
            }
        }
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Resolves a setting: command-line flag, then config file, then default.
pub fn pick<T: FromStr>(flag: Option<T>, file: Option<&KeyValues>, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(kv) = file {
        if let Some(v) = kv.get(key)? {
            return Ok(v);
        }
    }
    Ok(default)
}

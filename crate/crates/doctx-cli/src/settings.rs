//! Layered key=value configuration resolved into a total map.
//!
//! Every command starts from its complete default key set; config files,
//! `--set` overrides, and dedicated flags replace values in that order.
//! Unknown keys are rejected so the resolved map always covers exactly the
//! command's configuration surface.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Flag misuse, distinct from data errors; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(defaults: &[(&str, &str)]) -> Settings {
        Settings {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Applies one config file. Lines are `key=value`; blank lines and lines
    /// starting with `#` are skipped. Keys must already exist.
    pub fn layer_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let kept: Vec<&str> = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect();
        let map = doctx::metrics::parse_summary(&kept.join("\n"))
            .with_context(|| format!("parsing config {}", path.display()))?;
        for (k, v) in map {
            if !self.values.contains_key(&k) {
                bail!("unknown config key `{k}` in {}", path.display());
            }
            self.values.insert(k, v);
        }
        Ok(())
    }

    /// Applies `--set KEY=VALUE` overrides. Malformed or unknown keys are
    /// usage errors.
    pub fn apply_sets(&mut self, sets: &[String]) -> Result<()> {
        for s in sets {
            let Some((k, v)) = s.split_once('=') else {
                return Err(UsageError(format!("--set `{s}` is not KEY=VALUE")).into());
            };
            if !self.values.contains_key(k) {
                return Err(UsageError(format!("--set names unknown config key `{k}`")).into());
            }
            self.values.insert(k.to_string(), v.to_string());
        }
        Ok(())
    }

    /// Dedicated flags win over files and `--set`.
    pub fn override_with(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            assert!(self.values.contains_key(key), "unknown settings key {key}");
            self.values.insert(key.to_string(), v);
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("unknown settings key {key}"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.str(key)
            .parse()
            .with_context(|| format!("config key `{key}` = `{}` is not a count", self.str(key)))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.str(key)
            .parse()
            .with_context(|| format!("config key `{key}` = `{}` is not an integer", self.str(key)))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.str(key)
            .parse()
            .with_context(|| format!("config key `{key}` = `{}` is not a number", self.str(key)))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => bail!("config key `{key}` = `{v}` is not true/false"),
        }
    }

    /// Comma-separated list of exactly `n` numbers.
    pub fn f64_list(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        let raw = self.str(key);
        let parts: Result<Vec<f64>> = raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("config key `{key}` has non-numeric entry `{p}`"))
            })
            .collect();
        let parts = parts?;
        if parts.len() != n {
            bail!("config key `{key}` needs {n} comma-separated values, got {}", parts.len());
        }
        Ok(parts)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

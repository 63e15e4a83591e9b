//! Flat `key = value` scenario files.
//!
//! Keys are written either fully qualified (`source.rate_hz = 4.3e7`) or
//! under a `[section]` header. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Every accepted key, in the order scenario headers list them.
pub const KEYS: &[&str] = &[
    "source.rate_hz",
    "source.coherence_time_s",
    "source.shape",
    "chain.eta_idler",
    "chain.eta_signal",
    "chain.splitter",
    "chain.jitter_s",
    "window.tauc_s",
    "window.bin_s",
    "window.span_s",
    "window.grid_s",
    "window.mode",
    "run.duration_s",
    "run.seed",
    "run.model",
    "run.outputs",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unclosed section header", n + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            let key = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if config.entries.contains_key(&key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    n + 1
                )));
            }
            config.set(&key, value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("`{key}`: `{v}` is not a finite number")))
            })
            .transpose()
    }

    pub fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }
}

//! Flat `key = value` config files with flag overrides and a resolved echo.
//!
//! Keys are namespaced (`model.hidden_size`, `data.window`,
//! `predict.method`). Flags always win over file values; every run writes
//! the fully resolved settings next to its outputs for provenance.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use ttesurv::{Error, Result};

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "config line {} is not `key = value`: `{line}`",
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    /// Typed lookup; parse failures carry the offending key.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("config key `{key}` has invalid value `{raw}`"))
            }),
        }
    }
}

/// Accumulates the final values a run actually used.
#[derive(Debug, Default)]
pub struct ResolvedConfig {
    entries: BTreeMap<String, String>,
}

impl ResolvedConfig {
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Flag > config file > default, echoing the winner into `resolved`.
pub fn resolve<T: FromStr + Display + Clone>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
    resolved: &mut ResolvedConfig,
) -> Result<T> {
    let value = match flag {
        Some(v) => v,
        None => file.get::<T>(key)?.unwrap_or(default),
    };
    resolved.set(key, &value);
    Ok(value)
}

/// Comma-separated list of floats, e.g. threshold grids and coefficients.
pub fn parse_float_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("invalid number `{s}` in list")))
        })
        .collect()
}

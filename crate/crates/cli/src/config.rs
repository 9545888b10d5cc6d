//! Flat `key = value` configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Command-line flags override file entries. Vector-valued keys
//! take comma-separated lists, and a single value is broadcast to every
//! flow. `routing` separates link rows with `;`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{config, Result};

pub const KEYS: &[&str] = &[
    "criterion",
    "a",
    "b",
    "gamma",
    "alpha",
    "lambda",
    "rho",
    "routing",
    "link_weights",
    "policy",
    "x_bar",
    "min_th",
    "max_th",
    "p_max",
    "dt",
    "tau",
    "x0",
    "horizon",
    "warmup",
    "seed",
    "inject_perturbation",
    "tolerance",
    "points",
    "grid_points",
    "fd_tolerance",
    "lo",
    "hi",
    "grid",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                )));
            };
            cfg.set(&normalize(k), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.str(key).ok_or_else(|| missing(key))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.str(key).map(|v| parse_f64(key, v)).transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| {
                config(format!(
                    "key `{key}`: expected a non-negative integer, got `{v}`"
                ))
            }),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.str(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| {
                config(format!(
                    "key `{key}`: expected a non-negative integer, got `{v}`"
                ))
            }),
        }
    }

    /// Comma-separated list; `None` when the key is absent.
    pub fn list(&self, key: &str) -> Option<Vec<&str>> {
        self.str(key).map(|v| v.split(',').map(str::trim).collect())
    }

    /// `n` values from a list of length 1 or `n`.
    pub fn broadcast_str(&self, key: &str, n: usize) -> Result<Option<Vec<String>>> {
        let Some(items) = self.list(key) else {
            return Ok(None);
        };
        match items.len() {
            1 => Ok(Some(vec![items[0].to_string(); n])),
            m if m == n => Ok(Some(items.into_iter().map(String::from).collect())),
            m => Err(config(format!(
                "key `{key}`: expected 1 or {n} values, got {m}"
            ))),
        }
    }

    pub fn broadcast_f64(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>> {
        self.broadcast_str(key, n)?
            .map(|v| v.iter().map(|s| parse_f64(key, s)).collect())
            .transpose()
    }

    pub fn require_broadcast_f64(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        self.broadcast_f64(key, n)?.ok_or_else(|| missing(key))
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key)
            .map(|v| v.iter().map(|s| parse_f64(key, s)).collect())
            .transpose()
    }

    /// `routing` as 0/1 rows, one per link.
    pub fn routing(&self) -> Result<Option<Vec<Vec<u8>>>> {
        let Some(text) = self.str("routing") else {
            return Ok(None);
        };
        text.split(';')
            .map(|row| {
                row.split(',')
                    .map(|e| match e.trim() {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        other => Err(config(format!(
                            "key `routing`: entries must be 0 or 1, got `{other}`"
                        ))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()
            .map(Some)
    }
}

fn missing(key: &str) -> crate::error::CliError {
    config(format!(
        "missing required key `{key}` (flag --{})",
        key.replace('_', "-")
    ))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    v.parse()
        .map_err(|_| config(format!("key `{key}`: cannot parse `{v}` as a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_dashes() {
        let c = RunConfig::parse("# header\nx-bar = 0.5  # trailing\n\nrho=1\n").unwrap();
        assert_eq!(c.f64("x_bar").unwrap(), 0.5);
        assert_eq!(c.f64("rho").unwrap(), 1.0);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let e = RunConfig::parse("lamda = 2").unwrap_err().to_string();
        assert!(e.contains("`lamda`"), "{e}");
        let e = RunConfig::default().f64("lambda").unwrap_err().to_string();
        assert!(e.contains("`lambda`"), "{e}");
    }

    #[test]
    fn broadcast() {
        let c = RunConfig::parse("b = 0.5\nx0 = 0.1, 0.2, 0.3\ntau = inf").unwrap();
        assert_eq!(c.require_broadcast_f64("b", 3).unwrap(), vec![0.5; 3]);
        assert_eq!(
            c.require_broadcast_f64("x0", 3).unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        assert!(c.require_broadcast_f64("x0", 2).is_err());
        assert!(c.f64("tau").unwrap().is_infinite());
    }

    #[test]
    fn routing_rows() {
        let c = RunConfig::parse("routing = 1,0,1; 1,1,0").unwrap();
        assert_eq!(
            c.routing().unwrap().unwrap(),
            vec![vec![1, 0, 1], vec![1, 1, 0]]
        );
        assert!(RunConfig::parse("routing = 2").unwrap().routing().is_err());
    }
}

//! Experiment configuration: a plain-text `key = value` file, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use splittree::families::Family;
use splittree::renewal::{DEFAULT_STEP, DEFAULT_T_MAX};
use splittree::statistics::DEFAULT_EPSILON;
use splittree::BuildMode;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "family",
    "family_params",
    "n_grid",
    "replications",
    "base_seed",
    "epsilon",
    "beta",
    "mode",
    "out_csv",
    "out_json",
    "renewal.h",
    "renewal.t_max",
    "heavy.K",
    "heavy.runs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    pub base_seed: u64,
    pub epsilon: f64,
    pub beta: f64,
    pub mode: BuildMode,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub renewal_h: f64,
    pub renewal_t_max: f64,
    pub heavy_k: f64,
    pub heavy_runs: usize,
}

/// Raw settings as strings, in the order they were last assigned.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            raw.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(raw)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key `{key}` (known: {})", KEYS.join(", ")));
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let bad = |key: &str, value: &str, what: &str| CliError::Config(format!("{key} = `{value}`: {what}"));
        let num = |key: &str, default: f64| -> Result<f64, CliError> {
            match self.get(key) {
                None => Ok(default),
                Some(v) => v.parse::<f64>().map_err(|_| bad(key, v, "not a number")),
            }
        };
        let int = |key: &str, default: u64| -> Result<u64, CliError> {
            match self.get(key) {
                None => Ok(default),
                Some(v) => v.replace('_', "").parse::<u64>().map_err(|_| bad(key, v, "not a nonnegative integer")),
            }
        };

        let family = parse_family(self.get("family").unwrap_or("bst"), self.get("family_params"))?;
        let n_grid = match self.get("n_grid") {
            None => vec![1000],
            Some(v) => parse_grid(v).map_err(|e| bad("n_grid", v, &e))?,
        };
        let replications = int("replications", 100)? as usize;
        if replications < 2 {
            return Err(CliError::Config(format!("replications must be at least 2, got {replications}")));
        }
        let epsilon = num("epsilon", DEFAULT_EPSILON)?;
        let beta = num("beta", 2.0)?;
        for (key, v) in [("epsilon", epsilon), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{key} must be positive, got {v}")));
            }
        }
        let mode = match self.get("mode") {
            None => BuildMode::Traced,
            Some(v) => v.parse::<BuildMode>().map_err(|e| CliError::Config(e.to_string()))?,
        };
        let renewal_h = num("renewal.h", DEFAULT_STEP)?;
        let renewal_t_max = num("renewal.t_max", DEFAULT_T_MAX)?;
        let heavy_k = num("heavy.K", 100.0)?;
        if !(heavy_k >= 1.0) {
            return Err(CliError::Config(format!("heavy.K must be at least 1, got {heavy_k}")));
        }
        let heavy_runs = int("heavy.runs", 1000)? as usize;
        if heavy_runs < 2 {
            return Err(CliError::Config(format!("heavy.runs must be at least 2, got {heavy_runs}")));
        }
        Ok(ExperimentConfig {
            family,
            n_grid,
            replications,
            base_seed: int("base_seed", 1)?,
            epsilon,
            beta,
            mode,
            out_csv: self.get("out_csv").map(PathBuf::from),
            out_json: self.get("out_json").map(PathBuf::from),
            renewal_h,
            renewal_t_max,
            heavy_k,
            heavy_runs,
        })
    }
}

/// `bst`, `mary` with `family_params = 3`, or the inline forms `mary:3`,
/// `trie(0.5, 0.5)`.
fn parse_family(name: &str, params: Option<&str>) -> Result<Family, CliError> {
    let (name, inline) = if let Some((n, rest)) = name.split_once('(') {
        (n, Some(rest.trim_end().trim_end_matches(')')))
    } else if let Some((n, rest)) = name.split_once(':') {
        (n, Some(rest))
    } else {
        (name, None)
    };
    let params = match (inline, params) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("family parameters given both inline and in family_params".into()))
        }
        (a, b) => a.or(b),
    };
    Family::parse(name, params).map_err(|e| CliError::Config(e.to_string()))
}

/// Comma- or space-separated sizes, optionally bracketed; `1e5` is accepted.
fn parse_grid(v: &str) -> Result<Vec<u64>, String> {
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
    let grid: Vec<u64> = inner
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.replace('_', "");
            t.parse::<u64>().or_else(|_| match t.parse::<f64>() {
                Ok(x) if x >= 1.0 && x.fract() == 0.0 && x <= 4e9 => Ok(x as u64),
                _ => Err(format!("bad size `{t}`")),
            })
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    if grid.contains(&0) {
        return Err("sizes must be at least 1".into());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut raw = RawConfig::parse("family = mary\nfamily_params = 3\nn_grid = [1000, 1e4]\n# comment\n", "t").unwrap();
        raw.set("replications", "8").unwrap();
        let c = raw.resolve().unwrap();
        assert_eq!(c.family, Family::Mary { m: 3 });
        assert_eq!(c.n_grid, vec![1000, 10_000]);
        assert_eq!(c.replications, 8);
        assert_eq!(c.mode, BuildMode::Traced);
    }

    #[test]
    fn unknown_keys_fail() {
        let err = RawConfig::parse("familly = bst", "cfg").unwrap_err();
        assert!(err.to_string().contains("unknown key `familly`"), "{err}");
        assert!(RawConfig::parse("just text", "cfg").is_err());
    }

    #[test]
    fn inline_family_forms() {
        for text in ["family = trie(0.5, 0.5)", "family = trie:0.5/0.5", "family = trie\nfamily_params = 0.5/0.5"] {
            let c = RawConfig::parse(text, "t").unwrap().resolve().unwrap();
            assert_eq!(c.family, Family::Trie { p: vec![0.5, 0.5] });
        }
        assert!(RawConfig::parse("family = trie(0.5,0.5)\nfamily_params = 0.5/0.5", "t").unwrap().resolve().is_err());
    }

    #[test]
    fn invalid_values() {
        for text in ["replications = 1", "epsilon = 0", "n_grid = 0", "n_grid = 1.5", "mode = fast", "heavy.K = 0.5"] {
            assert!(RawConfig::parse(text, "t").unwrap().resolve().is_err(), "{text}");
        }
    }
}

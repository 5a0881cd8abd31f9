//! Flat key-value experiment configuration.
//!
//! Configs are text files of `key = value` lines with dotted section names
//! (`lsm.hidden = 200`). Every key can be overridden by the environment
//! (`LSMSIM_LSM_HIDDEN=200`, dots become underscores) and by `--set
//! key=value` on the command line; CLI wins over environment, environment
//! over file, file over built-in defaults.
//!
//! All randomness flows from exactly three named seeds so ablations stay
//! attributable: `seeds.weights` (conductance sampling and read/write
//! noise), `seeds.data` (dataset generation and input noise), and
//! `seeds.training` (shuffling and head initialization).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

/// Environment variable prefix for overrides.
pub const ENV_PREFIX: &str = "LSMSIM_";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Resolved experiment configuration: a flat, ordered key-value map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Built-in defaults only.
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a config file (`key = value` lines, `#` comments).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim());
        }
        Ok(cfg)
    }

    /// Apply `LSMSIM_*` environment overrides on top of the current values.
    pub fn apply_env(&mut self) {
        let mut overrides: Vec<(String, String)> = std::env::vars()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|rest| (rest.to_ascii_lowercase().replace('_', "."), v))
            })
            .collect();
        overrides.sort();
        for (k, v) in overrides {
            self.set(&k, &v);
        }
    }

    /// Apply `--set key=value` style overrides (highest precedence).
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                ConfigError(format!("override `{item}` is not of the form key=value"))
            })?;
            self.set(key.trim(), value.trim());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Full resolved map, for echoing into metrics files.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("{key}={v}: {e}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("{key}={v}: {e}"))),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("{key}={v}: {e}"))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(ConfigError(format!("{key}={v}: expected a boolean"))),
        }
    }

    /// Comma-separated f64 list; `never` parses as infinity (used by the
    /// early-exit threshold sweep).
    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    if item.eq_ignore_ascii_case("never") {
                        Ok(f64::INFINITY)
                    } else {
                        item.parse()
                            .map_err(|e| ConfigError(format!("{key}: `{item}`: {e}")))
                    }
                })
                .collect(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get_str("output.dir", "out"))
    }

    /// Named seed: conductance sampling and read/write noise streams.
    pub fn weights_seed(&self) -> Result<u64> {
        self.get_u64("seeds.weights", 1)
    }

    /// Named seed: dataset generation and input-noise streams.
    pub fn data_seed(&self) -> Result<u64> {
        self.get_u64("seeds.data", 2)
    }

    /// Named seed: shuffling and head initialization.
    pub fn training_seed(&self) -> Result<u64> {
        self.get_u64("seeds.training", 3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_env_cli_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "# comment line").unwrap();
        writeln!(f, "lsm.hidden = 100").unwrap();
        writeln!(f, "lsm.scale = 0.01").unwrap();
        drop(f);

        let mut cfg = Config::from_file(&path).unwrap();
        assert_eq!(cfg.get_usize("lsm.hidden", 0).unwrap(), 100);

        cfg.apply_overrides(&["lsm.hidden=250".into()]).unwrap();
        assert_eq!(cfg.get_usize("lsm.hidden", 0).unwrap(), 250);
        assert_eq!(cfg.get_f64("lsm.scale", 0.0).unwrap(), 0.01);
        assert_eq!(cfg.get_usize("lsm.width", 1).unwrap(), 1);
    }

    #[test]
    fn malformed_lines_and_values_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "just some words\n").unwrap();
        assert!(Config::from_file(&path).is_err());

        let mut cfg = Config::new();
        cfg.set("train.epochs", "many");
        assert!(cfg.get_usize("train.epochs", 1).is_err());
        assert!(cfg.apply_overrides(&["no-equals-sign".into()]).is_err());
    }

    #[test]
    fn f64_list_understands_never() {
        let mut cfg = Config::new();
        cfg.set("early_exit.thresholds", "0.5, 0.9, never");
        let v = cfg.get_f64_list("early_exit.thresholds", &[]).unwrap();
        assert_eq!(v[0], 0.5);
        assert_eq!(v[1], 0.9);
        assert!(v[2].is_infinite());
    }
}

//! Machine-readable artifacts. Every command writes a `metrics.json` whose
//! bytes depend only on (config, seeds): maps are ordered, no timestamps,
//! floats render through the standard shortest-representation formatter.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lsmsim_core::readout::EvalReport;
use serde::Serialize;

use crate::config::Config;

/// Envelope for `metrics.json`: command name, resolved config echo, payload.
#[derive(Debug, Serialize)]
pub struct Metrics<T: Serialize> {
    pub command: String,
    pub config: BTreeMap<String, String>,
    #[serde(flatten)]
    pub payload: T,
}

pub fn metrics<T: Serialize>(command: &str, cfg: &Config, payload: T) -> Metrics<T> {
    Metrics {
        command: command.to_string(),
        config: cfg.resolved().clone(),
        payload,
    }
}

/// Pretty JSON plus trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `confusion.csv`: header `truth\predicted,0..C-1`, one row per true class.
pub fn write_confusion_csv(path: &Path, report: &EvalReport) -> anyhow::Result<()> {
    let classes = report.confusion.len();
    let mut text = String::from("truth\\predicted");
    for c in 0..classes {
        text.push_str(&format!(",{c}"));
    }
    text.push('\n');
    for (truth, row) in report.confusion.iter().enumerate() {
        text.push_str(&truth.to_string());
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Ensure the output directory exists and return it.
pub fn prepare_output_dir(cfg: &Config) -> anyhow::Result<PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

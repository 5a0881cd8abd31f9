//! Dataset assembly: synthetic generators, native event-file indexes, and
//! the imported N-MNIST layout.
//!
//! A native dataset is a directory with an `index.csv` of
//! `path,label,split` rows (paths relative to the index) pointing at event
//! files in either the packed binary or JSON-lines form.

use std::fs;
use std::path::{Path, PathBuf};

use lsmsim_core::event::{bin_events, center_crop, io as event_io, EventStream, SpikeTensor};
use lsmsim_core::{Error, Result};
use rayon::prelude::*;

use crate::config::Config;
use crate::synth;

/// A labeled train/test split of spike tensors.
pub struct Dataset {
    pub train: Vec<(SpikeTensor, usize)>,
    pub test: Vec<(SpikeTensor, usize)>,
    pub classes: usize,
    pub channels: usize,
    pub steps: usize,
    /// Human-readable notes (degenerate templates, crop info).
    pub notes: Vec<String>,
}

/// One `index.csv` row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Read `index.csv` (header `path,label,split`).
pub fn read_index(index_path: &Path) -> Result<Vec<IndexEntry>> {
    let text = fs::read_to_string(index_path)?;
    let base = index_path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("path,") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::BadFormat(format!(
                "{}:{}: expected path,label,split",
                index_path.display(),
                i + 1
            )));
        }
        let label = fields[1]
            .trim()
            .parse()
            .map_err(|e| Error::BadFormat(format!("bad label {}: {e}", fields[1])))?;
        let split = match fields[2].trim() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::BadFormat(format!("bad split `{other}`")));
            }
        };
        out.push(IndexEntry {
            path: base.join(fields[0].trim()),
            label,
            split,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Write an `index.csv` with paths relative to `dir`.
pub fn write_index(dir: &Path, entries: &[(String, usize, Split)]) -> Result<()> {
    let mut text = String::from("path,label,split\n");
    for (path, label, split) in entries {
        let split = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        text.push_str(&format!("{path},{label},{split}\n"));
    }
    fs::write(dir.join("index.csv"), text)?;
    Ok(())
}

fn bin_one(
    stream: &EventStream,
    steps: usize,
    merge_polarity: bool,
    crop: Option<(usize, usize, usize, usize)>,
) -> Result<SpikeTensor> {
    let tensor = bin_events(stream, steps, merge_polarity)?;
    match crop {
        Some((full_h, full_w, crop_h, crop_w)) => {
            center_crop(&tensor, full_h, full_w, crop_h, crop_w)
        }
        None => Ok(tensor),
    }
}

/// Load a native-format dataset per the config's binning and crop settings.
pub fn load_native(cfg: &Config, index_path: &Path) -> anyhow::Result<Dataset> {
    let entries = read_index(index_path)?;
    let steps = cfg.get_usize("dataset.steps", 20)?;
    let merge = cfg.get_bool("dataset.merge_polarity", true)?;
    let crop = if cfg.get("crop.h").is_some() || cfg.get("crop.w").is_some() {
        let full_h = cfg.get_usize("crop.full_h", 34)?;
        let full_w = cfg.get_usize("crop.full_w", 34)?;
        let crop_h = cfg.get_usize("crop.h", 16)?;
        let crop_w = cfg.get_usize("crop.w", 16)?;
        Some((full_h, full_w, crop_h, crop_w))
    } else {
        None
    };
    let tensors: Vec<(SpikeTensor, usize, Split)> = entries
        .par_iter()
        .map(|e| {
            let stream = event_io::read_events_file(&e.path)?;
            let t = bin_one(&stream, steps, merge, crop)?;
            Ok((t, e.label, e.split))
        })
        .collect::<Result<Vec<_>>>()?;
    let channels = tensors
        .first()
        .map(|(t, _, _)| t.channels())
        .ok_or(Error::EmptyDataset)?;
    let classes = tensors.iter().map(|(_, l, _)| l + 1).max().unwrap_or(0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (t, label, split) in tensors {
        if t.channels() != channels {
            anyhow::bail!("inconsistent channel counts in dataset");
        }
        match split {
            Split::Train => train.push((t, label)),
            Split::Test => test.push((t, label)),
        }
    }
    let mut notes = Vec::new();
    if let Some((fh, fw, ch, cw)) = crop {
        notes.push(format!("cropped {fh}x{fw} -> {ch}x{cw}"));
    }
    Ok(Dataset {
        train,
        test,
        classes,
        channels,
        steps,
        notes,
    })
}

/// Build the synthetic dataset selected by `dataset.task`.
pub fn build_synthetic(cfg: &Config) -> anyhow::Result<Dataset> {
    let classes = cfg.get_usize("dataset.classes", 4)?;
    let channels = cfg.get_usize("dataset.channels", 32)?;
    let steps = cfg.get_usize("dataset.steps", 24)?;
    let rate_hi = cfg.get_f64("dataset.rate_hi", 0.8)?;
    let rate_lo = cfg.get_f64("dataset.rate_lo", 0.02)?;
    let task = cfg.get_str("dataset.task", "rate");
    let templates = match task.as_str() {
        "rate" => synth::rate_task_templates(classes, channels, steps, rate_hi, rate_lo),
        "temporal" => {
            let groups = cfg.get_usize("dataset.groups", 4)?;
            synth::temporal_task_templates(
                classes,
                channels,
                steps,
                groups,
                rate_hi,
                rate_lo,
                cfg.data_seed()?,
            )
        }
        other => anyhow::bail!("config error: unknown dataset.task `{other}`"),
    };
    let spec = synth::SyntheticTaskSpec {
        templates,
        samples_per_class: cfg.get_usize("dataset.samples_per_class", 40)?,
        test_samples_per_class: cfg.get_usize("dataset.test_samples_per_class", 20)?,
        seed: cfg.data_seed()?,
    };
    let d = synth::gen_synthetic(&spec)?;
    let mut notes = Vec::new();
    if d.degenerate_templates {
        notes.push("warning: degenerate identical class templates".into());
    }
    Ok(Dataset {
        train: d.train,
        test: d.test,
        classes,
        channels,
        steps,
        notes,
    })
}

/// Assemble the dataset named by `dataset.kind`.
pub fn build_dataset(cfg: &Config) -> anyhow::Result<Dataset> {
    match cfg.get_str("dataset.kind", "synthetic").as_str() {
        "synthetic" => build_synthetic(cfg),
        "native" => {
            let path = cfg
                .get("dataset.path")
                .ok_or_else(|| anyhow::anyhow!("config error: dataset.path is required"))?;
            let index = PathBuf::from(path).join("index.csv");
            load_native(cfg, &index)
        }
        other => anyhow::bail!("config error: unknown dataset.kind `{other}`"),
    }
}

/// Import a raw N-MNIST directory tree (`Train/<digit>/*.bin`,
/// `Test/<digit>/*.bin`; or `<digit>/*` treated as train) into the native
/// packed format plus an `index.csv`. Returns the number of samples.
pub fn import_nmnist(input: &Path, output: &Path, limit_per_class: Option<usize>) -> anyhow::Result<usize> {
    if !input.is_dir() {
        anyhow::bail!("data error: {} is not a directory", input.display());
    }
    fs::create_dir_all(output)?;
    let mut entries: Vec<(String, usize, Split)> = Vec::new();
    let mut jobs: Vec<(PathBuf, String, usize, Split)> = Vec::new();
    for (split_name, split) in [("Train", Split::Train), ("Test", Split::Test)] {
        let split_dir = input.join(split_name);
        if !split_dir.is_dir() {
            continue;
        }
        for digit in 0..10usize {
            let class_dir = split_dir.join(digit.to_string());
            if !class_dir.is_dir() {
                continue;
            }
            let mut files: Vec<PathBuf> = fs::read_dir(&class_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "bin").unwrap_or(false))
                .collect();
            files.sort();
            if let Some(limit) = limit_per_class {
                files.truncate(limit);
            }
            for f in files {
                let rel = format!(
                    "{}/{}/{}.lsme",
                    split_name,
                    digit,
                    f.file_stem().unwrap().to_string_lossy()
                );
                jobs.push((f, rel, digit, split));
            }
        }
    }
    if jobs.is_empty() {
        anyhow::bail!(
            "data error: no Train/<digit>/*.bin files under {}",
            input.display()
        );
    }
    jobs.par_iter().try_for_each(|(src, rel, _, _)| -> anyhow::Result<()> {
        let raw = fs::File::open(src)?;
        let stream = event_io::read_nmnist_aer(std::io::BufReader::new(raw))?;
        let dst = output.join(rel);
        fs::create_dir_all(dst.parent().unwrap())?;
        event_io::write_events_file(&dst, &stream)?;
        Ok(())
    })?;
    for (_, rel, digit, split) in jobs {
        entries.push((rel, digit, split));
    }
    let count = entries.len();
    write_index(output, &entries)?;
    Ok(count)
}

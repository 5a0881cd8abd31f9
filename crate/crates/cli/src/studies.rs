//! Parameter sweeps, the pooling ablation, and the early-exit study.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use lsmsim_core::cost::{self, LayerSpec};
use lsmsim_core::event::SpikeTensor;
use lsmsim_core::readout::{early_exit_infer, evaluate_features, linear_forward, argmax, train_linear};
use lsmsim_core::seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::data::{build_dataset, Dataset};
use crate::pipeline::{build_reservoirs, extract_features, run_supervised_on, train_config};

/// One sweep grid point result.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub repeat: usize,
    pub status: String,
    pub accuracy: Option<f64>,
    pub detail: String,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}\n",
            self.parameter,
            self.value,
            self.repeat,
            self.status,
            self.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            self.detail.replace(',', ";")
        )
    }
}

pub const SWEEP_HEADER: &str = "parameter,value,repeat,status,accuracy,detail\n";

/// Parse an existing sweep CSV into completed (value, repeat) keys.
fn existing_rows(path: &Path) -> Vec<SweepRow> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 6 {
                return None;
            }
            Some(SweepRow {
                parameter: f[0].into(),
                value: f[1].into(),
                repeat: f[2].parse().ok()?,
                status: f[3].into(),
                accuracy: f[4].parse().ok(),
                detail: f[5].into(),
            })
        })
        .collect()
}

/// Derived per-repeat config: the swept key is overridden and all three
/// named seeds are re-derived so repeats are independent trials.
fn point_config(base: &Config, parameter: &str, value: &str, repeat: usize) -> anyhow::Result<Config> {
    let mut cfg = base.clone();
    cfg.set(parameter, value);
    let tag = 0xB000 + repeat as u64;
    cfg.set(
        "seeds.weights",
        &seed::derive(base.weights_seed()?, tag).to_string(),
    );
    cfg.set(
        "seeds.data",
        &seed::derive(base.data_seed()?, tag).to_string(),
    );
    cfg.set(
        "seeds.training",
        &seed::derive(base.training_seed()?, tag).to_string(),
    );
    Ok(cfg)
}

/// Run one grid point end to end, returning its accuracy.
pub fn sweep_point(base: &Config, parameter: &str, value: &str, repeat: usize) -> anyhow::Result<f64> {
    let cfg = point_config(base, parameter, value, repeat)?;
    let (outcome, _) = crate::pipeline::run_supervised(&cfg)?;
    Ok(outcome.eval.accuracy)
}

/// Sweep outcome: all rows in canonical order plus per-value means.
#[derive(Debug, Serialize)]
pub struct SweepOutcome {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub mean_accuracy_per_value: Vec<(String, f64)>,
}

/// Run the configured sweep, resuming from any rows already present in
/// `sweep.csv`. Rows are written in grid order, so a completed sweep file is
/// byte-identical no matter how many partial runs produced it.
pub fn run_sweep(cfg: &Config, csv_path: Option<&Path>) -> anyhow::Result<SweepOutcome> {
    let parameter = cfg
        .get("sweep.parameter")
        .ok_or_else(|| anyhow::anyhow!("config error: sweep.parameter is required"))?
        .to_string();
    let values: Vec<String> = cfg
        .get("sweep.values")
        .ok_or_else(|| anyhow::anyhow!("config error: sweep.values is required"))?
        .split(',')
        .map(|v| v.trim().to_string())
        .collect();
    if values.is_empty() {
        anyhow::bail!("config error: sweep.values is empty");
    }
    let repeats = cfg.get_usize("sweep.repeats", 10)?;

    let done: BTreeSet<(String, usize)> = csv_path
        .map(existing_rows)
        .unwrap_or_default()
        .into_iter()
        .filter(|r| r.parameter == parameter && r.status == "ok")
        .map(|r| (r.value, r.repeat))
        .collect();
    let prior: Vec<SweepRow> = csv_path
        .map(existing_rows)
        .unwrap_or_default()
        .into_iter()
        .filter(|r| r.parameter == parameter && r.status == "ok")
        .collect();

    let grid: Vec<(String, usize)> = values
        .iter()
        .flat_map(|v| (0..repeats).map(move |r| (v.clone(), r)))
        .collect();
    let missing: Vec<&(String, usize)> =
        grid.iter().filter(|key| !done.contains(*key)).collect();
    let computed: Vec<SweepRow> = missing
        .par_iter()
        .map(|(value, repeat)| match sweep_point(cfg, &parameter, value, *repeat) {
            Ok(acc) => SweepRow {
                parameter: parameter.clone(),
                value: value.clone(),
                repeat: *repeat,
                status: "ok".into(),
                accuracy: Some(acc),
                detail: String::new(),
            },
            // partial failure is recorded per row; the sweep continues
            Err(e) => SweepRow {
                parameter: parameter.clone(),
                value: value.clone(),
                repeat: *repeat,
                status: "error".into(),
                accuracy: None,
                detail: e.to_string(),
            },
        })
        .collect();

    // canonical grid order
    let mut rows = Vec::with_capacity(grid.len());
    for (value, repeat) in &grid {
        let key = (value.clone(), *repeat);
        if done.contains(&key) {
            rows.push(
                prior
                    .iter()
                    .find(|r| r.value == *value && r.repeat == *repeat)
                    .cloned()
                    .expect("resumed row present"),
            );
        } else {
            rows.push(
                computed
                    .iter()
                    .find(|r| r.value == *value && r.repeat == *repeat)
                    .cloned()
                    .expect("computed row present"),
            );
        }
    }

    if let Some(path) = csv_path {
        let mut text = String::from(SWEEP_HEADER);
        for row in &rows {
            text.push_str(&row.csv_line());
        }
        fs::write(path, text)?;
    }

    let mean_accuracy_per_value = values
        .iter()
        .map(|v| {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| &r.value == v && r.status == "ok")
                .filter_map(|r| r.accuracy)
                .collect();
            let mean = if accs.is_empty() {
                f64::NAN
            } else {
                accs.iter().sum::<f64>() / accs.len() as f64
            };
            (v.clone(), mean)
        })
        .collect();
    Ok(SweepOutcome {
        parameter,
        rows,
        mean_accuracy_per_value,
    })
}

/// Time pooling of a binary spike tensor into per-channel features.
pub fn pool_features(tensor: &SpikeTensor, method: &str) -> Vec<f64> {
    let (t_steps, channels) = (tensor.steps(), tensor.channels());
    let mut out = vec![0.0f64; channels];
    #[allow(clippy::needless_range_loop)]
    for u in 0..channels {
        let column: Vec<u8> = (0..t_steps).map(|t| tensor.get(t, u)).collect();
        out[u] = match method {
            "max" => column.iter().copied().max().unwrap_or(0) as f64,
            "avg" => column.iter().map(|&v| v as f64).sum::<f64>() / t_steps as f64,
            "sum" => column.iter().map(|&v| v as f64).sum::<f64>(),
            other => panic!("unknown pooling method {other}"),
        };
    }
    out
}

/// One ablation table row.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub method: String,
    pub accuracy: f64,
    pub forward_macs: u64,
    pub backward_macs: u64,
    pub encoder_macs: u64,
}

#[derive(Debug, Serialize)]
pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
}

/// Train identical readouts on pooled features and on LSM counts, and
/// compare accuracies and costs.
pub fn run_ablation(cfg: &Config) -> anyhow::Result<AblationOutcome> {
    let dataset = build_dataset(cfg)?;
    let tc = train_config(cfg)?;
    let mut rows = Vec::new();

    // LSM route
    let (outcome, _) = run_supervised_on(cfg, &dataset)?;
    let lsm_arch = cost::count_ops(&cost::lsm_ann_architecture(
        dataset.channels,
        cfg.get_usize("lsm.hidden", 100)? * cfg.get_usize("lsm.width", 1)?.max(cfg.get_usize("lsm.depth", 1)?),
        dataset.steps,
        dataset.classes,
    ));
    rows.push(AblationRow {
        method: "lsm".into(),
        accuracy: outcome.eval.accuracy,
        forward_macs: lsm_arch.total_forward,
        backward_macs: lsm_arch.total_backward,
        encoder_macs: lsm_arch.layers[0].forward_macs,
    });

    // pooling routes
    for method in ["max", "avg", "sum"] {
        let train: Vec<(Vec<f64>, usize)> = dataset
            .train
            .iter()
            .map(|(t, l)| (pool_features(t, method), *l))
            .collect();
        let test: Vec<(Vec<f64>, usize)> = dataset
            .test
            .iter()
            .map(|(t, l)| (pool_features(t, method), *l))
            .collect();
        let (layer, _) = train_linear::<f64>(&train, dataset.classes, &tc)?;
        let report = evaluate_features(&layer, &test)?;
        let arch = cost::count_ops(&[
            LayerSpec::Pooling {
                name: format!("{method}-pool"),
                units: dataset.channels,
            },
            LayerSpec::Dense {
                name: "readout".into(),
                input: dataset.channels,
                output: dataset.classes,
                trainable: true,
            },
        ]);
        rows.push(AblationRow {
            method: format!("{method}-pool"),
            accuracy: report.accuracy,
            forward_macs: arch.total_forward,
            backward_macs: arch.total_backward,
            encoder_macs: arch.layers[0].forward_macs,
        });
    }
    Ok(AblationOutcome { rows })
}

/// One row of the early-exit threshold study.
#[derive(Debug, Clone, Serialize)]
pub struct EarlyExitRow {
    /// Threshold; infinity encodes "never exit early".
    pub threshold: f64,
    pub accuracy: f64,
    pub mean_exit_step: f64,
    /// Fraction of forward steps saved relative to the full window.
    pub step_saving: f64,
    /// Predictions identical to standard full-window inference.
    pub matches_baseline: bool,
}

#[derive(Debug, Serialize)]
pub struct EarlyExitOutcome {
    pub rows: Vec<EarlyExitRow>,
    pub baseline_accuracy: f64,
}

/// Confidence-threshold sweep of early-exit inference on the test split.
pub fn run_early_exit(cfg: &Config, dataset: &Dataset) -> anyhow::Result<EarlyExitOutcome> {
    if cfg.get_usize("lsm.width", 1)? > 1 || cfg.get_usize("lsm.depth", 1)? > 1 {
        anyhow::bail!("config error: early exit needs lsm.width = lsm.depth = 1");
    }
    let thresholds = cfg.get_f64_list("early_exit.thresholds", &[0.5, 0.7, 0.9, f64::INFINITY])?;
    let reservoirs = build_reservoirs(cfg, dataset.channels)?;
    let weights_seed = cfg.weights_seed()?;
    let data_seed = cfg.data_seed()?;
    let input_noise = cfg.get_f64("noise.input", 0.0)?;

    // train the readout exactly as the standard pipeline does
    let train_features = extract_features(
        &reservoirs,
        &dataset.train,
        input_noise,
        data_seed,
        weights_seed,
        1,
    )?;
    let tc = train_config(cfg)?;
    let (layer, _) =
        lsmsim_core::readout::train_supervised::<f64>(&train_features, dataset.classes, &tc)?;

    // baseline predictions on full windows (same per-sample trial seeds as
    // the early-exit runs below)
    let test_features = extract_features(
        &reservoirs,
        &dataset.test,
        input_noise,
        data_seed,
        weights_seed,
        2,
    )?;
    let baseline: Vec<usize> = test_features
        .iter()
        .map(|(c, _)| {
            let logits = linear_forward(&layer, &c.normalized::<f64>()).unwrap();
            argmax(&logits)
        })
        .collect();
    let baseline_accuracy = baseline
        .iter()
        .zip(dataset.test.iter())
        .filter(|(p, (_, l))| *p == l)
        .count() as f64
        / dataset.test.len() as f64;

    let lsm_cfg = &reservoirs.configs[0];
    let t_total = dataset.steps as f64;
    let mut rows = Vec::new();
    for &th in &thresholds {
        let results: Vec<(usize, usize)> = dataset
            .test
            .par_iter()
            .enumerate()
            .map(|(i, (tensor, _))| {
                let idx = 2u64.wrapping_mul(0x1000_0000).wrapping_add(i as u64);
                let noisy;
                let input = if input_noise > 0.0 {
                    noisy = lsmsim_core::event::inject_input_noise(
                        tensor,
                        input_noise,
                        seed::derive(data_seed, idx),
                    )?;
                    &noisy
                } else {
                    tensor
                };
                let out = early_exit_infer(input, lsm_cfg, &layer, th, seed::derive(weights_seed, idx))?;
                Ok(out)
            })
            .collect::<lsmsim_core::Result<Vec<_>>>()?;
        let accuracy = results
            .iter()
            .zip(dataset.test.iter())
            .filter(|((p, _), (_, l))| p == l)
            .count() as f64
            / results.len() as f64;
        let mean_exit_step =
            results.iter().map(|(_, s)| *s as f64).sum::<f64>() / results.len() as f64;
        let matches_baseline = results
            .iter()
            .zip(baseline.iter())
            .all(|((p, _), b)| p == b);
        rows.push(EarlyExitRow {
            threshold: th,
            accuracy,
            mean_exit_step,
            step_saving: 1.0 - mean_exit_step / t_total,
            matches_baseline,
        });
    }
    Ok(EarlyExitOutcome {
        rows,
        baseline_accuracy,
    })
}

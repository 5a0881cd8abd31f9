//! Command implementations: each builds its pipeline, writes artifacts into
//! the output directory, and returns a short human-readable summary line.

use std::path::{Path, PathBuf};

use lsmsim_core::cost::{
    self, cost_ratio, CostKind, RecurrentKind,
};
use lsmsim_core::event::{io as event_io, raster_to_stream};
use lsmsim_core::readout::{read_checkpoint_file, write_checkpoint_file};
use lsmsim_core::weights::randomness::{extract_bits, monobit_test, runs_test, RunsOutcome};
use lsmsim_core::weights::{sample_conductance, ConductanceDist, Forming};
use serde::Serialize;

use crate::config::Config;
use crate::data::{self, build_dataset, Split};
use crate::output::{metrics, prepare_output_dir, write_confusion_csv, write_json};
use crate::pipeline::{self, run_supervised_on};
use crate::studies;
use crate::zeroshot;

/// Exit-code-bearing error for the binary: 2 config, 3 data, 4 skipped.
#[derive(Debug)]
pub struct ExitError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ExitError {}

pub fn skip_error(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ExitError {
        code: 4,
        message: message.into(),
    })
}

/// Generate the configured synthetic dataset and write it out as native
/// event files plus an index.
pub fn cmd_gen_data(cfg: &Config) -> anyhow::Result<String> {
    let dataset = build_dataset(cfg)?;
    let dir = prepare_output_dir(cfg)?;
    let mut entries = Vec::new();
    for (split_name, split, samples) in [
        ("train", Split::Train, &dataset.train),
        ("test", Split::Test, &dataset.test),
    ] {
        std::fs::create_dir_all(dir.join(split_name))?;
        for (i, (tensor, label)) in samples.iter().enumerate() {
            let rel = format!("{split_name}/s{i:05}.lsme");
            let stream = raster_to_stream(tensor);
            event_io::write_events_file(&dir.join(&rel), &stream)?;
            entries.push((rel, *label, split));
        }
    }
    data::write_index(&dir, &entries)?;

    #[derive(Serialize)]
    struct GenPayload {
        classes: usize,
        channels: usize,
        steps: usize,
        train_samples: usize,
        test_samples: usize,
        notes: Vec<String>,
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics(
            "gen-data",
            cfg,
            GenPayload {
                classes: dataset.classes,
                channels: dataset.channels,
                steps: dataset.steps,
                train_samples: dataset.train.len(),
                test_samples: dataset.test.len(),
                notes: dataset.notes.clone(),
            },
        ),
    )?;
    Ok(format!(
        "wrote {} train + {} test samples to {}",
        dataset.train.len(),
        dataset.test.len(),
        dir.display()
    ))
}

fn dataset_or_skip(cfg: &Config) -> anyhow::Result<crate::data::Dataset> {
    if cfg.get_str("dataset.kind", "synthetic") == "native" {
        let path = PathBuf::from(cfg.get_str("dataset.path", ""));
        if !path.join("index.csv").exists() {
            return Err(skip_error(format!(
                "skipped: dataset absent at {} (run import-nmnist or gen-data first)",
                path.display()
            )));
        }
    }
    build_dataset(cfg)
}

/// Train the readout end to end and persist model plus reports.
pub fn cmd_train(cfg: &Config) -> anyhow::Result<String> {
    let dataset = dataset_or_skip(cfg)?;
    let (outcome, layer) = run_supervised_on(cfg, &dataset)?;
    let dir = prepare_output_dir(cfg)?;
    write_checkpoint_file(&dir.join("model.bin"), &layer)?;
    write_confusion_csv(&dir.join("confusion.csv"), &outcome.eval)?;
    write_json(&dir.join("cost.json"), &outcome.cost)?;

    #[derive(Serialize)]
    struct TrainPayload<'a> {
        accuracy: f64,
        train_accuracy: f64,
        per_class_accuracy: &'a [f64],
        loss_curve: &'a [f64],
        notes: &'a [String],
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics(
            "train",
            cfg,
            TrainPayload {
                accuracy: outcome.eval.accuracy,
                train_accuracy: outcome.train_accuracy,
                per_class_accuracy: &outcome.eval.per_class_accuracy,
                loss_curve: &outcome.loss_curve,
                notes: &outcome.notes,
            },
        ),
    )?;
    Ok(format!(
        "test accuracy {:.4} ({} classes); artifacts in {}",
        outcome.eval.accuracy,
        dataset.classes,
        dir.display()
    ))
}

/// Evaluate a stored checkpoint; runs the early-exit study when
/// `early_exit.thresholds` is configured.
pub fn cmd_eval(cfg: &Config) -> anyhow::Result<String> {
    let dataset = dataset_or_skip(cfg)?;
    let dir = prepare_output_dir(cfg)?;
    let model_path = PathBuf::from(
        cfg.get_str("model.path", dir.join("model.bin").to_str().unwrap()),
    );
    if !model_path.exists() {
        anyhow::bail!("data error: no checkpoint at {}", model_path.display());
    }
    let layer = read_checkpoint_file::<f64>(&model_path)?;
    let reservoirs = pipeline::build_reservoirs(cfg, dataset.channels)?;
    let features = pipeline::extract_features(
        &reservoirs,
        &dataset.test,
        cfg.get_f64("noise.input", 0.0)?,
        cfg.data_seed()?,
        cfg.weights_seed()?,
        2,
    )?;
    let report = lsmsim_core::readout::evaluate(&layer, &features)?;
    write_confusion_csv(&dir.join("confusion.csv"), &report)?;

    let early_exit = if cfg.get("early_exit.thresholds").is_some() {
        Some(studies::run_early_exit(cfg, &dataset)?)
    } else {
        None
    };

    #[derive(Serialize)]
    struct EvalPayload<'a> {
        accuracy: f64,
        per_class_accuracy: &'a [f64],
        #[serde(skip_serializing_if = "Option::is_none")]
        early_exit: Option<&'a studies::EarlyExitOutcome>,
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics(
            "eval",
            cfg,
            EvalPayload {
                accuracy: report.accuracy,
                per_class_accuracy: &report.per_class_accuracy,
                early_exit: early_exit.as_ref(),
            },
        ),
    )?;
    Ok(format!("test accuracy {:.4}", report.accuracy))
}

/// Contrastive training plus zero-shot retrieval report.
pub fn cmd_zeroshot(cfg: &Config) -> anyhow::Result<String> {
    let outcome = zeroshot::run_zero_shot(cfg)?;
    let dir = prepare_output_dir(cfg)?;
    zeroshot::write_embeddings(&dir.join("embeddings.csv"), &outcome.embeddings)?;

    #[derive(Serialize)]
    struct ZsPayload<'a> {
        seen: &'a zeroshot::SplitReport,
        unseen: &'a zeroshot::SplitReport,
        contrastive_loss_curve: &'a [f64],
        degenerate_batches: usize,
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics(
            "zeroshot",
            cfg,
            ZsPayload {
                seen: &outcome.seen,
                unseen: &outcome.unseen,
                contrastive_loss_curve: &outcome.contrastive_loss_curve,
                degenerate_batches: outcome.degenerate_batches,
            },
        ),
    )?;
    Ok(format!(
        "seen top-1 {:.4}, unseen top-1 {:.4}",
        outcome.seen.top1, outcome.unseen.top1
    ))
}

/// Grid sweep over one config key.
pub fn cmd_sweep(cfg: &Config) -> anyhow::Result<String> {
    let dir = prepare_output_dir(cfg)?;
    let csv = dir.join("sweep.csv");
    let outcome = studies::run_sweep(cfg, Some(&csv))?;

    #[derive(Serialize)]
    struct SweepPayload<'a> {
        parameter: &'a str,
        mean_accuracy_per_value: &'a [(String, f64)],
        rows: usize,
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics(
            "sweep",
            cfg,
            SweepPayload {
                parameter: &outcome.parameter,
                mean_accuracy_per_value: &outcome.mean_accuracy_per_value,
                rows: outcome.rows.len(),
            },
        ),
    )?;
    Ok(format!(
        "{} rows over {} values; results in {}",
        outcome.rows.len(),
        outcome.mean_accuracy_per_value.len(),
        csv.display()
    ))
}

/// LSM vs. pooling comparison table.
pub fn cmd_ablate(cfg: &Config) -> anyhow::Result<String> {
    let outcome = studies::run_ablation(cfg)?;
    let dir = prepare_output_dir(cfg)?;
    let mut text = String::from("method,accuracy,forward_macs,backward_macs,encoder_macs\n");
    for row in &outcome.rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.method, row.accuracy, row.forward_macs, row.backward_macs, row.encoder_macs
        ));
    }
    std::fs::write(dir.join("ablation.csv"), text)?;

    #[derive(Serialize)]
    struct AblatePayload<'a> {
        rows: &'a [studies::AblationRow],
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics("ablate", cfg, AblatePayload { rows: &outcome.rows }),
    )?;
    let lsm = outcome.rows[0].accuracy;
    let best_pool = outcome.rows[1..]
        .iter()
        .map(|r| r.accuracy)
        .fold(f64::MIN, f64::max);
    Ok(format!(
        "lsm {:.4} vs best pooling {:.4} (margin {:+.4})",
        lsm,
        best_pool,
        lsm - best_pool
    ))
}

/// MAC counts, energy estimates, and baseline training-cost ratios.
pub fn cmd_cost(cfg: &Config) -> anyhow::Result<String> {
    let channels = cfg.get_usize("dataset.channels", 32)?;
    let hidden = cfg.get_usize("lsm.hidden", 100)?;
    let steps = cfg.get_usize("dataset.steps", 24)?;
    let classes = cfg.get_usize("dataset.classes", 4)?;

    let lsm_ops = cost::count_ops(&cost::lsm_ann_architecture(channels, hidden, steps, classes));
    let events = pipeline::standard_events(steps, hidden, hidden, classes);
    let report = cost::hybrid_energy(&lsm_ops, &events, &pipeline::energy_model(cfg)?)?;

    #[derive(Serialize)]
    struct BaselineRow {
        model: String,
        forward_macs: u64,
        backward_macs: u64,
        train_cost_vs_lsm: f64,
    }
    let mut baselines = Vec::new();
    for kind in [
        RecurrentKind::Rnn,
        RecurrentKind::Srnn,
        RecurrentKind::Gru,
        RecurrentKind::Lstm,
    ] {
        let ops = cost::count_ops(&cost::recurrent_ann_architecture(
            kind, channels, hidden, steps, classes,
        ));
        baselines.push(BaselineRow {
            model: format!("{}-ann", kind.name()),
            forward_macs: ops.total_forward,
            backward_macs: ops.total_backward,
            train_cost_vs_lsm: cost_ratio(&ops, &lsm_ops, CostKind::Training)?,
        });
    }

    #[derive(Serialize)]
    struct CostPayload {
        report: cost::CostReport,
        baselines: Vec<BaselineRow>,
    }
    let dir = prepare_output_dir(cfg)?;
    let payload = CostPayload {
        report: report.clone(),
        baselines,
    };
    write_json(&dir.join("cost.json"), &payload)?;
    write_json(&dir.join("metrics.json"), &metrics("cost", cfg, payload))?;
    Ok(format!(
        "forward {} MACs, train {} MACs, hybrid {:.3e} J vs digital {:.3e} J",
        report.ops.total_forward,
        report.ops.total_backward,
        report.energy_hybrid_j,
        report.energy_digital_j
    ))
}

/// Randomness tests on bits extracted from a sampled conductance array.
pub fn cmd_rng_test(cfg: &Config) -> anyhow::Result<String> {
    let rows = cfg.get_usize("rng.rows", 512)?;
    let cols = cfg.get_usize("rng.cols", 512)?;
    let dist = ConductanceDist::new(
        cfg.get_f64("lsm.dist_mean", 33.0)?,
        cfg.get_f64("lsm.dist_std", 3.0)?,
    );
    let arr = sample_conductance::<f64>(rows, cols, dist, Forming::Dense, cfg.weights_seed()?)?;
    let bits = extract_bits(&arr);
    let monobit_p = monobit_test(&bits)?;
    let runs = runs_test(&bits)?;

    #[derive(Serialize)]
    struct RngPayload {
        bits: usize,
        ones: usize,
        monobit_p: f64,
        monobit_pass: bool,
        runs_p: Option<f64>,
        runs_applicable: bool,
        runs_pass: bool,
    }
    let payload = RngPayload {
        bits: bits.len(),
        ones: bits.ones(),
        monobit_p,
        monobit_pass: monobit_p >= lsmsim_core::weights::randomness::PASS_THRESHOLD,
        runs_p: runs.p_value(),
        runs_applicable: !matches!(runs, RunsOutcome::NotApplicable { .. }),
        runs_pass: runs.passes(),
    };
    let dir = prepare_output_dir(cfg)?;
    let summary = format!(
        "monobit p {:.4} ({}), runs {}",
        payload.monobit_p,
        if payload.monobit_pass { "pass" } else { "fail" },
        match runs {
            RunsOutcome::PValue(p) => format!("p {:.4} ({})", p, if p >= 0.01 { "pass" } else { "fail" }),
            RunsOutcome::NotApplicable { ones_fraction } =>
                format!("not applicable (ones fraction {ones_fraction:.4})"),
        }
    );
    write_json(&dir.join("metrics.json"), &metrics("rng-test", cfg, payload))?;
    Ok(summary)
}

/// Convert a raw N-MNIST tree into the native format.
pub fn cmd_import_nmnist(cfg: &Config, input: &Path) -> anyhow::Result<String> {
    if !input.exists() {
        return Err(skip_error(format!(
            "skipped: N-MNIST directory absent at {}",
            input.display()
        )));
    }
    let dir = prepare_output_dir(cfg)?;
    let limit = match cfg.get_usize("import.limit_per_class", 0)? {
        0 => None,
        n => Some(n),
    };
    let count = data::import_nmnist(input, &dir, limit)?;

    #[derive(Serialize)]
    struct ImportPayload {
        samples: usize,
    }
    write_json(
        &dir.join("metrics.json"),
        &metrics("import-nmnist", cfg, ImportPayload { samples: count }),
    )?;
    Ok(format!("imported {count} samples into {}", dir.display()))
}

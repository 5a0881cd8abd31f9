//! Experiment orchestration: reservoir assembly from config, feature
//! extraction, and the end-to-end supervised pipeline.

use std::collections::BTreeMap;

use anyhow::Context;
use lsmsim_core::cost::{
    self, hybrid_energy, lsm_ann_architecture, Component, CostReport, EnergyModel, HybridEvents,
};
use lsmsim_core::event::{inject_input_noise, SpikeTensor};
use lsmsim_core::lsm::{deep_forward, lsm_forward, wide_forward, LifParams, SpikeCountVector};
use lsmsim_core::readout::{
    evaluate, train_supervised, EvalReport, LinearLayer, Optimizer, TrainConfig,
};
use lsmsim_core::weights::{
    apply_write_noise, differential_weights, sample_conductance, ConductanceDist, Forming,
};
use lsmsim_core::{seed, LsmConfig64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::data::Dataset;

/// Reservoir stack built from one shared conductance array.
pub struct Reservoirs {
    /// Width arrangement: parallel single-layer reservoirs.
    /// Depth arrangement: chained layers.
    pub configs: Vec<LsmConfig64>,
    pub arrangement: Arrangement,
    pub hidden: usize,
    pub input_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    Single,
    Wide,
    Deep,
}

impl Reservoirs {
    /// Feature dimension of the concatenated count vector.
    pub fn feature_dim(&self) -> usize {
        self.hidden * self.configs.len()
    }

    /// Count features for one input tensor.
    pub fn forward(&self, input: &SpikeTensor, trial_seed: u64) -> anyhow::Result<SpikeCountVector> {
        let counts = match self.arrangement {
            Arrangement::Single => lsm_forward(input, &self.configs[0], trial_seed)?.1,
            Arrangement::Wide => wide_forward(input, &self.configs, trial_seed)?,
            Arrangement::Deep => deep_forward(input, &self.configs, trial_seed)?,
        };
        Ok(counts)
    }
}

/// Read-noise sweep units: fraction of the conductance std (default) or
/// absolute microsiemens.
fn read_noise_std(cfg: &Config, dist_std: f64) -> anyhow::Result<f64> {
    let level = cfg.get_f64("noise.read", 0.0)?;
    let mode = cfg.get_str("noise.read_mode", "fraction");
    match mode.as_str() {
        "fraction" => Ok(level * dist_std),
        "absolute" => Ok(level),
        other => anyhow::bail!("config error: unknown noise.read_mode `{other}`"),
    }
}

/// Build the reservoir stack for the given input dimension.
///
/// All views (input and recurrent, across width or depth) are windows of a
/// single shared conductance array, mirroring one physical crossbar serving
/// every encoder. Write noise perturbs that array once before any view is
/// derived; read noise applies per trial at read time.
pub fn build_reservoirs(cfg: &Config, input_dim: usize) -> anyhow::Result<Reservoirs> {
    let hidden = cfg.get_usize("lsm.hidden", 100)?;
    let width = cfg.get_usize("lsm.width", 1)?;
    let depth = cfg.get_usize("lsm.depth", 1)?;
    if width > 1 && depth > 1 {
        anyhow::bail!("config error: lsm.width and lsm.depth cannot both exceed 1");
    }
    let scale = cfg.get_f64("lsm.scale", 0.1)?;
    let params = LifParams::new(
        cfg.get_f64("lsm.threshold", 1.0)?,
        cfg.get_f64("lsm.decay", 0.9)?,
    );
    let mean = cfg.get_f64("lsm.dist_mean", 33.0)?;
    let std = cfg.get_f64("lsm.dist_std", 3.0)?;
    let forming = match cfg.get_str("lsm.forming", "dense").as_str() {
        "dense" => Forming::Dense,
        "sparse" => Forming::Sparse,
        other => anyhow::bail!("config error: unknown lsm.forming `{other}`"),
    };
    let dist = ConductanceDist::new(mean, std)
        .with_sparsity(cfg.get_f64("lsm.sparsity", 0.0)?);
    let read_std = read_noise_std(cfg, std)?;
    let write_frac = cfg.get_f64("noise.write", 0.0)?;

    // column layout: per block, an input view (u_k + 1 cols) then a
    // recurrent view (hidden + 1 cols)
    let blocks: Vec<usize> = match (width, depth) {
        (w, 1) => vec![input_dim; w],
        (1, d) => {
            let mut dims = vec![input_dim];
            dims.extend(std::iter::repeat_n(hidden, d - 1));
            dims
        }
        _ => unreachable!(),
    };
    let total_cols: usize = blocks.iter().map(|u| (u + 1) + (hidden + 1)).sum();
    let weights_seed = cfg.weights_seed()?;
    let array = sample_conductance(hidden, total_cols, dist, forming, weights_seed)
        .context("sampling conductance array")?;
    let array = apply_write_noise(&array, write_frac, seed::derive(weights_seed, 0x77));

    let quantize_bits = cfg.get_usize("lsm.quantize_bits", 0)?;
    let finish = |bundle: lsmsim_core::weights::WeightBundle<f64>| {
        let bundle = bundle.with_read_noise(read_std);
        if quantize_bits > 0 {
            bundle.with_quantization(quantize_bits as u8)
        } else {
            bundle
        }
    };
    let mut configs = Vec::new();
    let mut col = 0usize;
    for &u in &blocks {
        let input = finish(differential_weights(&array, 0..hidden, col..col + u + 1, scale)?);
        col += u + 1;
        let recurrent =
            finish(differential_weights(&array, 0..hidden, col..col + hidden + 1, scale)?);
        col += hidden + 1;
        configs.push(lsmsim_core::lsm::LsmConfig::new(params, input, recurrent)?);
    }
    let arrangement = if depth > 1 {
        Arrangement::Deep
    } else if width > 1 {
        Arrangement::Wide
    } else {
        Arrangement::Single
    };
    Ok(Reservoirs {
        configs,
        arrangement,
        hidden,
        input_dim,
    })
}

/// Extract count features for every sample, with optional input-noise
/// injection. Parallel over samples; deterministic regardless of the thread
/// count because every sample derives its own seeds from its index.
pub fn extract_features(
    reservoirs: &Reservoirs,
    samples: &[(SpikeTensor, usize)],
    input_noise_p: f64,
    data_seed: u64,
    weights_seed: u64,
    role: u64,
) -> anyhow::Result<Vec<(SpikeCountVector, usize)>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, (tensor, label))| {
            let idx = role.wrapping_mul(0x1000_0000).wrapping_add(i as u64);
            let noisy;
            let input = if input_noise_p > 0.0 {
                noisy = inject_input_noise(tensor, input_noise_p, seed::derive(data_seed, idx))?;
                &noisy
            } else {
                tensor
            };
            let counts = reservoirs.forward(input, seed::derive(weights_seed, idx))?;
            Ok((counts, *label))
        })
        .collect()
}

/// Training hyperparameters from config.
pub fn train_config(cfg: &Config) -> anyhow::Result<TrainConfig> {
    let optimizer = match cfg.get_str("train.optimizer", "sgd").as_str() {
        "sgd" => Optimizer::Sgd,
        "momentum" => Optimizer::Momentum {
            mu: cfg.get_f64("train.momentum", 0.9)?,
        },
        other => anyhow::bail!("config error: unknown train.optimizer `{other}`"),
    };
    Ok(TrainConfig {
        lr: cfg.get_f64("train.lr", 0.05)?,
        epochs: cfg.get_usize("train.epochs", 20)?,
        batch_size: cfg.get_usize("train.batch", 32)?,
        seed: cfg.training_seed()?,
        optimizer,
    })
}

/// Energy model from config; component energies default to the reference
/// macro values, with the digital efficiency standing in for the LIF and
/// counter per-event costs unless overridden.
pub fn energy_model(cfg: &Config) -> anyhow::Result<EnergyModel> {
    let mut model = EnergyModel::reference_macro();
    let eff = model.digital.efficiency_j_per_op()?;
    model = model
        .with_component(Component::Lif, cfg.get_f64("energy.lif_j", eff)?)
        .with_component(Component::Counter, cfg.get_f64("energy.counter_j", eff)?);
    for (key, component) in [
        ("energy.array_j", Component::Array),
        ("energy.driver_j", Component::Driver),
        ("energy.adc_j", Component::Adc),
        ("energy.mux_j", Component::Mux),
    ] {
        if cfg.get(key).is_some() {
            model = model.with_component(component, cfg.get_f64(key, 0.0)?);
        }
    }
    Ok(model)
}

/// Per-sample component event counts of the standard pipeline: one input
/// and one recurrent vector op per step on the array path, one LIF update
/// and one counter increment per neuron per step, and the readout MACs on
/// the digital side.
pub fn standard_events(
    steps: usize,
    hidden: usize,
    feature_dim: usize,
    classes: usize,
) -> HybridEvents {
    let vec_ops = 2 * steps as u64;
    HybridEvents::default()
        .with_events(Component::Array, vec_ops)
        .with_events(Component::Driver, vec_ops)
        .with_events(Component::Adc, vec_ops)
        .with_events(Component::Mux, vec_ops)
        .with_events(Component::Lif, (hidden * steps) as u64)
        .with_events(Component::Counter, (hidden * steps) as u64)
        .with_readout_macs((feature_dim * classes) as u64)
}

/// Everything the supervised pipeline produces.
#[derive(Debug, Serialize)]
pub struct SupervisedOutcome {
    pub eval: EvalReport,
    pub train_accuracy: f64,
    pub loss_curve: Vec<f64>,
    pub cost: CostReport,
    pub notes: Vec<String>,
}

/// End-to-end supervised run on an already-built dataset: extract features,
/// train the readout, evaluate, and account costs.
pub fn run_supervised_on(
    cfg: &Config,
    dataset: &Dataset,
) -> anyhow::Result<(SupervisedOutcome, LinearLayer<f64>)> {
    let reservoirs = build_reservoirs(cfg, dataset.channels)?;
    let input_noise = cfg.get_f64("noise.input", 0.0)?;
    let data_seed = cfg.data_seed()?;
    let weights_seed = cfg.weights_seed()?;
    let train_features = extract_features(
        &reservoirs,
        &dataset.train,
        input_noise,
        data_seed,
        weights_seed,
        1,
    )?;
    let test_features = extract_features(
        &reservoirs,
        &dataset.test,
        input_noise,
        data_seed,
        weights_seed,
        2,
    )?;
    let tc = train_config(cfg)?;
    let (layer, loss_curve) = train_supervised::<f64>(&train_features, dataset.classes, &tc)?;
    let train_eval = evaluate(&layer, &train_features)?;
    let eval = evaluate(&layer, &test_features)?;

    let arch = lsm_ann_architecture(
        dataset.channels,
        reservoirs.feature_dim(),
        dataset.steps,
        dataset.classes,
    );
    let ops = cost::count_ops(&arch);
    let events = standard_events(
        dataset.steps,
        reservoirs.feature_dim(),
        reservoirs.feature_dim(),
        dataset.classes,
    );
    let cost = hybrid_energy(&ops, &events, &energy_model(cfg)?)?;

    Ok((
        SupervisedOutcome {
            eval,
            train_accuracy: train_eval.accuracy,
            loss_curve,
            cost,
            notes: dataset.notes.clone(),
        },
        layer,
    ))
}

/// Convenience wrapper: build the dataset from config and run.
pub fn run_supervised(cfg: &Config) -> anyhow::Result<(SupervisedOutcome, LinearLayer<f64>)> {
    let dataset = crate::data::build_dataset(cfg)?;
    run_supervised_on(cfg, &dataset)
}

/// Flat metrics map for serialization (used by several commands).
pub fn metrics_map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

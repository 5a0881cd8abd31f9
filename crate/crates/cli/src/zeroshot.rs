//! Crossmodal zero-shot pipeline: two LSM encoders sharing one conductance
//! array (separate input views, one shared recurrent view), trainable
//! projection heads optimized with the contrastive loss on seen classes
//! only, and prototype-based retrieval evaluated separately on seen and
//! unseen splits.

use std::collections::BTreeSet;
use std::path::PathBuf;

use lsmsim_core::contrastive::{
    build_prototypes, train_contrastive, zero_shot_classify, topk_accuracy, EmbeddingRow,
};
use lsmsim_core::event::SpikeTensor;
use lsmsim_core::lsm::{lsm_forward, LifParams, LsmConfig};
use lsmsim_core::readout::{LinearLayer, TrainConfig};
use lsmsim_core::weights::{
    apply_write_noise, differential_weights, sample_conductance, ConductanceDist, Forming,
};
use lsmsim_core::seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::data;
use crate::synth;

/// Paired two-modality data with explicit seen/unseen class splits.
pub struct PairedData {
    /// Matched (vision, audio, class) training pairs; seen classes only.
    pub train_pairs: Vec<(SpikeTensor, SpikeTensor, usize)>,
    /// Vision samples for prototype construction, all classes.
    pub support_vision: Vec<(SpikeTensor, usize)>,
    /// Audio queries, all classes.
    pub query_audio: Vec<(SpikeTensor, usize)>,
    /// Vision halves matched to the audio queries (for the
    /// prototypes-from-queries variant).
    pub query_vision: Vec<(SpikeTensor, usize)>,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub vision_channels: usize,
    pub audio_channels: usize,
    pub steps: usize,
}

fn synthetic_paired(cfg: &Config) -> anyhow::Result<PairedData> {
    let seen_n = cfg.get_usize("zeroshot.seen", 5)?;
    let unseen_n = cfg.get_usize("zeroshot.unseen", 2)?;
    let classes = seen_n + unseen_n;
    let steps = cfg.get_usize("dataset.steps", 16)?;
    let vision_channels = cfg.get_usize("dataset.channels", 24)?;
    let audio_channels = cfg.get_usize("dataset.audio_channels", 16)?;
    let rate_hi = cfg.get_f64("dataset.rate_hi", 0.9)?;
    let rate_lo = cfg.get_f64("dataset.rate_lo", 0.02)?;
    let data_seed = cfg.data_seed()?;
    let latent_dim = cfg.get_usize("zeroshot.latent_dim", 3)?;
    let jitter = cfg.get_f64("zeroshot.latent_jitter", 0.1)?;
    let task = synth::PairedTask::new(
        classes,
        vision_channels,
        audio_channels,
        steps,
        latent_dim,
        rate_hi,
        rate_lo,
        jitter,
        data_seed,
    );
    let pairs_per_class = cfg.get_usize("dataset.samples_per_class", 30)?;
    let support_per_class = cfg.get_usize("zeroshot.support_per_class", 10)?;
    let queries_per_class = cfg.get_usize("zeroshot.queries_per_class", 20)?;

    let seen: Vec<usize> = (0..seen_n).collect();
    let unseen: Vec<usize> = (seen_n..classes).collect();

    let mut train_pairs = Vec::new();
    for &class in &seen {
        for i in 0..pairs_per_class {
            let s = seed::derive(data_seed, (class * 7_000_003 + i) as u64);
            let (v, a) = task.sample_pair(class, s)?;
            train_pairs.push((v, a, class));
        }
    }
    let mut support_vision = Vec::new();
    let mut query_audio = Vec::new();
    let mut query_vision = Vec::new();
    for class in 0..classes {
        for i in 0..support_per_class {
            let s = seed::derive(data_seed, (class * 9_000_011 + i) as u64 ^ 0x50F0);
            support_vision.push((task.sample_vision(class, s)?, class));
        }
        for i in 0..queries_per_class {
            let s = seed::derive(data_seed, (class * 11_000_027 + i) as u64 ^ 0x0EE);
            query_audio.push((task.sample_audio(class, s)?, class));
            query_vision.push((task.sample_vision(class, seed::derive(s, 7))?, class));
        }
    }
    Ok(PairedData {
        train_pairs,
        support_vision,
        query_audio,
        query_vision,
        seen,
        unseen,
        vision_channels,
        audio_channels,
        steps,
    })
}

/// Pair two native datasets by (class, within-class order); unseen classes
/// come from `zeroshot.unseen_classes`.
fn native_paired(cfg: &Config) -> anyhow::Result<PairedData> {
    let vision_dir = cfg
        .get("dataset.vision_path")
        .ok_or_else(|| anyhow::anyhow!("config error: dataset.vision_path is required"))?;
    let audio_dir = cfg
        .get("dataset.audio_path")
        .ok_or_else(|| anyhow::anyhow!("config error: dataset.audio_path is required"))?;
    let vision = data::load_native(cfg, &PathBuf::from(vision_dir).join("index.csv"))?;
    let audio = data::load_native(cfg, &PathBuf::from(audio_dir).join("index.csv"))?;
    let unseen: Vec<usize> = cfg
        .get_f64_list("zeroshot.unseen_classes", &[])?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    if unseen.is_empty() {
        anyhow::bail!("config error: zeroshot.unseen_classes is required for native pairing");
    }
    let classes = vision.classes.max(audio.classes);
    let unseen_set: BTreeSet<usize> = unseen.iter().copied().collect();
    let seen: Vec<usize> = (0..classes).filter(|c| !unseen_set.contains(c)).collect();

    let by_class = |samples: &[(SpikeTensor, usize)], class: usize| -> Vec<SpikeTensor> {
        samples
            .iter()
            .filter(|(_, l)| *l == class)
            .map(|(t, _)| t.clone())
            .collect()
    };
    let mut train_pairs = Vec::new();
    for &class in &seen {
        let v = by_class(&vision.train, class);
        let a = by_class(&audio.train, class);
        for (tv, ta) in v.into_iter().zip(a) {
            train_pairs.push((tv, ta, class));
        }
    }
    let support_vision = vision.train.clone();
    let query_audio = audio.test.clone();
    let query_vision = vision.test.clone();
    Ok(PairedData {
        train_pairs,
        support_vision,
        query_audio,
        query_vision,
        seen,
        unseen,
        vision_channels: vision.channels,
        audio_channels: audio.channels,
        steps: vision.steps,
    })
}

pub fn build_paired(cfg: &Config) -> anyhow::Result<PairedData> {
    match cfg.get_str("dataset.kind", "synthetic").as_str() {
        "synthetic" => synthetic_paired(cfg),
        "native" => native_paired(cfg),
        other => anyhow::bail!("config error: unknown dataset.kind `{other}`"),
    }
}

/// The two encoders: separate input views, one shared recurrent view, all
/// windows of a single conductance array.
pub struct SharedEncoders {
    pub vision: LsmConfig<f64>,
    pub audio: LsmConfig<f64>,
    pub hidden: usize,
}

pub fn build_shared_encoders(
    cfg: &Config,
    vision_channels: usize,
    audio_channels: usize,
) -> anyhow::Result<SharedEncoders> {
    let hidden = cfg.get_usize("lsm.hidden", 100)?;
    let scale = cfg.get_f64("lsm.scale", 0.1)?;
    let params = LifParams::new(
        cfg.get_f64("lsm.threshold", 1.0)?,
        cfg.get_f64("lsm.decay", 0.9)?,
    );
    let mean = cfg.get_f64("lsm.dist_mean", 33.0)?;
    let std = cfg.get_f64("lsm.dist_std", 3.0)?;
    let dist = ConductanceDist::new(mean, std);
    let read_level = cfg.get_f64("noise.read", 0.0)?;
    let read_std = match cfg.get_str("noise.read_mode", "fraction").as_str() {
        "fraction" => read_level * std,
        "absolute" => read_level,
        other => anyhow::bail!("config error: unknown noise.read_mode `{other}`"),
    };
    let weights_seed = cfg.weights_seed()?;
    let cols = (vision_channels + 1) + (audio_channels + 1) + (hidden + 1);
    let array = sample_conductance(hidden, cols, dist, Forming::Dense, weights_seed)?;
    let array = apply_write_noise(
        &array,
        cfg.get_f64("noise.write", 0.0)?,
        seed::derive(weights_seed, 0x77),
    );
    let v_end = vision_channels + 1;
    let a_end = v_end + audio_channels + 1;
    let vision_in =
        differential_weights(&array, 0..hidden, 0..v_end, scale)?.with_read_noise(read_std);
    let audio_in =
        differential_weights(&array, 0..hidden, v_end..a_end, scale)?.with_read_noise(read_std);
    let recurrent = differential_weights(&array, 0..hidden, a_end..a_end + hidden + 1, scale)?
        .with_read_noise(read_std);
    Ok(SharedEncoders {
        vision: LsmConfig::new(params, vision_in, recurrent.clone())?,
        audio: LsmConfig::new(params, audio_in, recurrent)?,
        hidden,
    })
}

fn encode_all(
    cfg_lsm: &LsmConfig<f64>,
    samples: &[(SpikeTensor, usize)],
    weights_seed: u64,
    role: u64,
) -> anyhow::Result<Vec<(Vec<f64>, usize)>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, (tensor, label))| {
            let trial = seed::derive(weights_seed, role.wrapping_mul(0x2000_0000) + i as u64);
            let (_, counts) = lsm_forward(tensor, cfg_lsm, trial)?;
            Ok((counts.normalized::<f64>(), *label))
        })
        .collect()
}

/// Metrics of one retrieval split.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub classes: Vec<usize>,
    pub queries: usize,
    pub top1: f64,
    pub topk: f64,
    pub k: usize,
}

/// Zero-shot pipeline outcome.
#[derive(Debug, Serialize)]
pub struct ZeroShotOutcome {
    pub seen: SplitReport,
    pub unseen: SplitReport,
    pub contrastive_loss_curve: Vec<f64>,
    pub degenerate_batches: usize,
    pub embeddings: Vec<EmbeddingRowOwned>,
}

/// Serializable embedding row for the CSV export.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingRowOwned {
    pub id: usize,
    pub class: usize,
    pub modality: String,
    pub vector: Vec<f64>,
}

fn rank_split(
    queries: &[(Vec<f64>, usize)],
    prototypes_from: &[(Vec<f64>, usize)],
    split_classes: &[usize],
    k_cap: usize,
) -> anyhow::Result<SplitReport> {
    let class_set: BTreeSet<usize> = split_classes.iter().copied().collect();
    let protos: Vec<(Vec<f64>, usize)> = prototypes_from
        .iter()
        .filter(|(_, c)| class_set.contains(c))
        .cloned()
        .collect();
    let prototypes = build_prototypes(&protos)?;
    let mut rankings = Vec::new();
    let mut truths = Vec::new();
    for (q, label) in queries.iter().filter(|(_, c)| class_set.contains(c)) {
        rankings.push(zero_shot_classify(q, &prototypes));
        truths.push(*label);
    }
    let k = k_cap.min(split_classes.len()).max(1);
    Ok(SplitReport {
        classes: split_classes.to_vec(),
        queries: truths.len(),
        top1: topk_accuracy(&rankings, &truths, 1)?,
        topk: topk_accuracy(&rankings, &truths, k)?,
        k,
    })
}

/// A held-out class leaking into the training pairs is a hard error.
pub fn check_no_leak(
    train_pairs: &[(SpikeTensor, SpikeTensor, usize)],
    unseen: &[usize],
) -> anyhow::Result<()> {
    let unseen_set: BTreeSet<usize> = unseen.iter().copied().collect();
    for (_, _, class) in train_pairs {
        if unseen_set.contains(class) {
            anyhow::bail!("data error: held-out class {class} present in training pairs");
        }
    }
    Ok(())
}

/// Full zero-shot run: encode, contrastive-train on seen pairs, build
/// prototypes from projected vision embeddings, rank audio queries.
pub fn run_zero_shot(cfg: &Config) -> anyhow::Result<ZeroShotOutcome> {
    let data = build_paired(cfg)?;
    check_no_leak(&data.train_pairs, &data.unseen)?;
    let encoders = build_shared_encoders(cfg, data.vision_channels, data.audio_channels)?;
    let weights_seed = cfg.weights_seed()?;

    let vision_pairs: Vec<(SpikeTensor, usize)> = data
        .train_pairs
        .iter()
        .map(|(v, _, c)| (v.clone(), *c))
        .collect();
    let audio_pairs: Vec<(SpikeTensor, usize)> = data
        .train_pairs
        .iter()
        .map(|(_, a, c)| (a.clone(), *c))
        .collect();
    let v_feats = encode_all(&encoders.vision, &vision_pairs, weights_seed, 1)?;
    let a_feats = encode_all(&encoders.audio, &audio_pairs, weights_seed, 2)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>, usize)> = v_feats
        .into_iter()
        .zip(a_feats)
        .map(|((v, c), (a, _))| (v, a, c))
        .collect();

    let dim = cfg.get_usize("contrastive.dim", 16)?;
    let temperature = cfg.get_f64("contrastive.temperature", 1.0)?;
    let training_seed = cfg.training_seed()?;
    let proj_v = LinearLayer::<f64>::random_init(
        dim,
        encoders.hidden,
        0.3,
        seed::derive(training_seed, 0x56),
    );
    let proj_a = LinearLayer::<f64>::random_init(
        dim,
        encoders.hidden,
        0.3,
        seed::derive(training_seed, 0x41),
    );
    let tc = TrainConfig {
        lr: cfg.get_f64("contrastive.lr", 0.5)?,
        epochs: cfg.get_usize("contrastive.epochs", 100)?,
        batch_size: cfg.get_usize("contrastive.batch", 16)?,
        seed: training_seed,
        optimizer: crate::pipeline::train_config(cfg)?.optimizer,
    };
    let (proj_v, proj_a, stats) = if tc.epochs == 0 {
        (proj_v, proj_a, Default::default())
    } else {
        train_contrastive(&pairs, &proj_v, &proj_a, temperature, &tc)?
    };

    // projected embeddings for supports and queries
    let support_from_queries = cfg.get_bool("zeroshot.support_from_queries", false)?;
    let support_raw = if support_from_queries {
        &data.query_vision
    } else {
        &data.support_vision
    };
    let support_feats = encode_all(&encoders.vision, support_raw, weights_seed, 3)?;
    let query_feats = encode_all(&encoders.audio, &data.query_audio, weights_seed, 4)?;
    let project = |layer: &LinearLayer<f64>,
                   feats: &[(Vec<f64>, usize)]|
     -> anyhow::Result<Vec<(Vec<f64>, usize)>> {
        feats
            .iter()
            .map(|(x, c)| Ok((lsmsim_core::readout::linear_forward(layer, x)?, *c)))
            .collect()
    };
    let support_emb = project(&proj_v, &support_feats)?;
    let query_emb = project(&proj_a, &query_feats)?;

    let k_cap = cfg.get_usize("zeroshot.topk", 5)?;
    let seen = rank_split(&query_emb, &support_emb, &data.seen, k_cap)?;
    let unseen = rank_split(&query_emb, &support_emb, &data.unseen, k_cap)?;

    let mut embeddings = Vec::new();
    for (i, (v, c)) in support_emb.iter().enumerate() {
        embeddings.push(EmbeddingRowOwned {
            id: i,
            class: *c,
            modality: "vision".into(),
            vector: v.clone(),
        });
    }
    let offset = support_emb.len();
    for (i, (v, c)) in query_emb.iter().enumerate() {
        embeddings.push(EmbeddingRowOwned {
            id: offset + i,
            class: *c,
            modality: "audio".into(),
            vector: v.clone(),
        });
    }

    Ok(ZeroShotOutcome {
        seen,
        unseen,
        contrastive_loss_curve: stats.loss_curve,
        degenerate_batches: stats.degenerate_batches,
        embeddings,
    })
}

/// Write the embeddings CSV next to the metrics.
pub fn write_embeddings(path: &std::path::Path, rows: &[EmbeddingRowOwned]) -> anyhow::Result<()> {
    let borrowed: Vec<EmbeddingRow<f64>> = rows
        .iter()
        .map(|r| EmbeddingRow {
            id: r.id,
            class: r.class,
            modality: if r.modality == "vision" { "vision" } else { "audio" },
            vector: r.vector.clone(),
        })
        .collect();
    let f = std::fs::File::create(path)?;
    lsmsim_core::contrastive::write_embeddings_csv(std::io::BufWriter::new(f), &borrowed)?;
    Ok(())
}

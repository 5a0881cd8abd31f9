//! Trainable linear classification head on spike counts: forward pass,
//! analytic gradients, SGD training, evaluation, and confidence-thresholded
//! early-exit inference.
//!
//! Count features are scaled by 1/T before entering the head so learning
//! rates stay comparable across time-window sweeps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::SpikeTensor;
use crate::lsm::{LsmConfig, LsmRunner, SpikeCountVector};
use crate::scalar::Scalar;
use crate::seed;

/// Magic number of the checkpoint format.
pub const CHECKPOINT_MAGIC: u32 = 0x4C49_4E52;

/// Fully connected layer `y = W x + b` with `W` of shape out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> LinearLayer<F> {
    /// Zero-initialized layer.
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    /// Small random Gaussian initialization, deterministic given the seed.
    pub fn random_init(out_dim: usize, in_dim: usize, scale: f64, init_seed: u64) -> Self {
        let mut rng = seed::rng(init_seed, 0x696E_6974); // "init"
        let s = F::from_f64_c(scale);
        let w = Array2::from_shape_simple_fn((out_dim, in_dim), || s * F::standard_normal(&mut rng));
        Self {
            w,
            b: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Compute logits `W x + b`.
pub fn linear_forward<F: Scalar>(layer: &LinearLayer<F>, x: &[F]) -> Result<Vec<F>> {
    if x.len() != layer.in_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} features, layer expects {}",
            x.len(),
            layer.in_dim()
        )));
    }
    let mut out = Vec::with_capacity(layer.out_dim());
    for i in 0..layer.out_dim() {
        let row = layer.w.row(i);
        let row = row.to_slice().expect("row-major");
        let mut acc = layer.b[i];
        for (w, &xi) in row.iter().zip(x.iter()) {
            acc += *w * xi;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Numerically stabilized softmax probabilities.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy loss and its gradient with respect to the logits:
/// `loss = -log p_label`, `grad = p - one_hot(label)`.
pub fn softmax_xent<F: Scalar>(logits: &[F], label: usize) -> (F, Vec<F>) {
    assert!(label < logits.len(), "label out of range");
    let p = softmax(logits);
    let eps = F::from_f64_c(f64::MIN_POSITIVE);
    let loss = -(p[label].max(eps)).ln();
    let mut grad = p;
    grad[label] -= F::one();
    (loss, grad)
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Optimizer choice for the linear heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    Momentum { mu: f64 },
}

/// Training hyperparameters shared by the supervised and contrastive heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    fn validate(&self) {
        assert!(self.lr >= 0.0, "learning rate must be non-negative");
        assert!(self.epochs >= 1, "need at least one epoch");
        assert!(self.batch_size >= 1, "need batch size >= 1");
    }
}

/// Deterministic per-epoch sample order.
fn epoch_order(n: usize, train_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(train_seed, 0x7368_7566 ^ epoch as u64); // "shuf"
    order.shuffle(&mut rng);
    order
}

/// Mini-batch gradient descent on mean softmax cross-entropy over raw
/// feature vectors. Returns the trained layer and the per-epoch mean loss.
pub fn train_linear<F: Scalar>(
    features: &[(Vec<F>, usize)],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(LinearLayer<F>, Vec<f64>)> {
    cfg.validate();
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let in_dim = features[0].0.len();
    for (x, label) in features {
        if x.len() != in_dim {
            return Err(Error::DimensionMismatch(
                "inconsistent feature dimensions".into(),
            ));
        }
        if *label >= num_classes {
            return Err(Error::DimensionMismatch(format!(
                "label {label} outside {num_classes} classes"
            )));
        }
    }
    let mut layer = LinearLayer::<F>::zeros(num_classes, in_dim);
    let mut vel_w: Array2<F> = Array2::zeros((num_classes, in_dim));
    let mut vel_b: Array1<F> = Array1::zeros(num_classes);
    let lr = F::from_f64_c(cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(features.len(), cfg.seed, epoch);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_w: Array2<F> = Array2::zeros((num_classes, in_dim));
            let mut grad_b: Array1<F> = Array1::zeros(num_classes);
            let scale = F::from_f64_c(1.0 / batch.len() as f64);
            for &idx in batch {
                let (x, label) = &features[idx];
                let logits = linear_forward(&layer, x)?;
                let (loss, grad_logits) = softmax_xent(&logits, *label);
                epoch_loss += loss.to_f64_c();
                for c in 0..num_classes {
                    let g = grad_logits[c] * scale;
                    grad_b[c] += g;
                    for (gw, &xi) in grad_w.row_mut(c).iter_mut().zip(x.iter()) {
                        *gw += g * xi;
                    }
                }
            }
            match cfg.optimizer {
                Optimizer::Sgd => {
                    layer.w.zip_mut_with(&grad_w, |w, &g| *w -= lr * g);
                    layer.b.zip_mut_with(&grad_b, |b, &g| *b -= lr * g);
                }
                Optimizer::Momentum { mu } => {
                    let mu = F::from_f64_c(mu);
                    vel_w.zip_mut_with(&grad_w, |v, &g| *v = mu * *v + g);
                    vel_b.zip_mut_with(&grad_b, |v, &g| *v = mu * *v + g);
                    layer.w.zip_mut_with(&vel_w, |w, &v| *w -= lr * v);
                    layer.b.zip_mut_with(&vel_b, |b, &v| *b -= lr * v);
                }
            }
        }
        curve.push(epoch_loss / features.len() as f64);
    }
    Ok((layer, curve))
}

/// Normalize spike counts by the window length and train the readout.
pub fn train_supervised<F: Scalar>(
    features: &[(SpikeCountVector, usize)],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<(LinearLayer<F>, Vec<f64>)> {
    let raw: Vec<(Vec<F>, usize)> = features
        .iter()
        .map(|(c, label)| (c.normalized::<F>(), *label))
        .collect();
    train_linear(&raw, num_classes, cfg)
}

/// Accuracy, confusion matrix, and per-class accuracy of a model over a
/// labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, row sums equal class sample counts.
    pub confusion: Vec<Vec<u64>>,
    pub per_class_accuracy: Vec<f64>,
}

/// Evaluate with argmax prediction (lowest-index tie-break) on raw features.
pub fn evaluate_features<F: Scalar>(
    layer: &LinearLayer<F>,
    dataset: &[(Vec<F>, usize)],
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = layer.out_dim();
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut correct = 0u64;
    for (x, label) in dataset {
        if *label >= classes {
            return Err(Error::DimensionMismatch(format!(
                "label {label} outside {classes} classes"
            )));
        }
        let logits = linear_forward(layer, x)?;
        let pred = argmax(&logits);
        confusion[*label][pred] += 1;
        if pred == *label {
            correct += 1;
        }
    }
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvalReport {
        accuracy: correct as f64 / dataset.len() as f64,
        confusion,
        per_class_accuracy,
    })
}

/// Evaluate on spike-count features.
pub fn evaluate<F: Scalar>(
    layer: &LinearLayer<F>,
    dataset: &[(SpikeCountVector, usize)],
) -> Result<EvalReport> {
    let raw: Vec<(Vec<F>, usize)> = dataset
        .iter()
        .map(|(c, label)| (c.normalized::<F>(), *label))
        .collect();
    evaluate_features(layer, &raw)
}

/// Run the reservoir step by step and classify the running count vector
/// after each step; exit as soon as the maximum softmax probability reaches
/// `conf_th`, otherwise return the full-window prediction at step T.
///
/// Running counts are scaled by the number of elapsed steps, so the final
/// step reproduces standard inference exactly. Thresholds above 1 never
/// trigger an early exit.
pub fn early_exit_infer<F: Scalar>(
    input: &SpikeTensor,
    cfg: &LsmConfig<F>,
    model: &LinearLayer<F>,
    conf_th: f64,
    trial_seed: u64,
) -> Result<(usize, usize)> {
    assert!(conf_th >= 0.0, "confidence threshold must be non-negative");
    let t_total = input.steps();
    let mut runner = LsmRunner::new(cfg, trial_seed);
    let mut last_pred = 0usize;
    for t in 1..=t_total {
        runner.step(input.row(t - 1))?;
        let scale = F::from_f64_c(1.0 / t as f64);
        let feat: Vec<F> = runner
            .counts()
            .iter()
            .map(|&c| F::from_f64_c(c as f64) * scale)
            .collect();
        let logits = linear_forward(model, &feat)?;
        let probs = softmax(&logits);
        let pred = argmax(&probs);
        last_pred = pred;
        if t < t_total && probs[pred].to_f64_c() >= conf_th {
            return Ok((pred, t));
        }
    }
    Ok((last_pred, t_total))
}

/// Write a checkpoint: u32 magic, u32 out, u32 in, then W row-major f64 and
/// b f64, all little-endian.
pub fn write_checkpoint<F: Scalar, W: Write>(mut w: W, layer: &LinearLayer<F>) -> Result<()> {
    w.write_u32::<LittleEndian>(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(layer.out_dim() as u32)?;
    w.write_u32::<LittleEndian>(layer.in_dim() as u32)?;
    for &v in layer.w.iter() {
        w.write_f64::<LittleEndian>(v.to_f64_c())?;
    }
    for &v in layer.b.iter() {
        w.write_f64::<LittleEndian>(v.to_f64_c())?;
    }
    Ok(())
}

/// Read a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint<F: Scalar, R: Read>(mut r: R) -> Result<LinearLayer<F>> {
    let magic = r.read_u32::<LittleEndian>()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadFormat(format!(
            "bad checkpoint magic {magic:#010x}, expected {CHECKPOINT_MAGIC:#010x}"
        )));
    }
    let out_dim = r.read_u32::<LittleEndian>()? as usize;
    let in_dim = r.read_u32::<LittleEndian>()? as usize;
    let mut w = Array2::zeros((out_dim, in_dim));
    for v in w.iter_mut() {
        *v = F::from_f64_c(r.read_f64::<LittleEndian>()?);
    }
    let mut b = Array1::zeros(out_dim);
    for v in b.iter_mut() {
        *v = F::from_f64_c(r.read_f64::<LittleEndian>()?);
    }
    Ok(LinearLayer { w, b })
}

pub fn write_checkpoint_file<F: Scalar>(path: &Path, layer: &LinearLayer<F>) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, layer)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint_file<F: Scalar>(path: &Path) -> Result<LinearLayer<F>> {
    let f = File::open(path)?;
    read_checkpoint(BufReader::new(f))
}

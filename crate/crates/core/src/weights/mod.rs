//! Stochastic conductance arrays and the differential-pair weights they
//! implement.
//!
//! Conductances are sampled once (mimicking post-forming device statistics),
//! shared between any number of weight views, optionally perturbed by a
//! one-time write noise, and read back with fresh per-call read noise.

pub mod io;
pub mod randomness;

use std::ops::Range;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Forming regime of a conductance array: a large forming voltage yields a
/// dense matrix, a lower one leaves a fraction of cells unformed (zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forming {
    Dense,
    Sparse,
}

/// Target conductance statistics in microsiemens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductanceDist<F> {
    pub mean: F,
    pub std: F,
    /// Fraction of unformed (zero) cells; only used in sparse mode.
    pub sparsity: F,
}

impl<F: Scalar> ConductanceDist<F> {
    pub fn new(mean: F, std: F) -> Self {
        Self {
            mean,
            std,
            sparsity: F::zero(),
        }
    }

    pub fn with_sparsity(mut self, sparsity: F) -> Self {
        self.sparsity = sparsity;
        self
    }
}

impl<F: Scalar> Default for ConductanceDist<F> {
    /// Low-resistance-state statistics of the reference device (~30 kOhm).
    fn default() -> Self {
        Self {
            mean: F::from_f64_c(33.0),
            std: F::from_f64_c(3.0),
            sparsity: F::zero(),
        }
    }
}

/// How an array came to be; loaded arrays carry no generation record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenRecord<F> {
    pub forming: Forming,
    pub seed: u64,
    pub dist: ConductanceDist<F>,
}

/// Non-negative conductance matrix in microsiemens, cheaply shareable
/// between weight views.
#[derive(Debug, Clone)]
pub struct ConductanceArray<F> {
    g: Arc<Array2<F>>,
    record: Option<GenRecord<F>>,
}

impl<F: Scalar> ConductanceArray<F> {
    /// Wrap an externally produced matrix (e.g. loaded from disk).
    pub fn from_matrix(g: Array2<F>) -> Result<Self> {
        if g.iter().any(|&v| v < F::zero() || !v.is_finite()) {
            return Err(Error::BadFormat(
                "conductances must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            g: Arc::new(g),
            record: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn cols(&self) -> usize {
        self.g.ncols()
    }

    pub fn matrix(&self) -> &Array2<F> {
        &self.g
    }

    pub fn record(&self) -> Option<&GenRecord<F>> {
        self.record.as_ref()
    }

    /// True when both arrays view the same physical cells.
    pub fn shares_storage_with(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.g, &other.g)
    }
}

/// Draw one conductance from the normal distribution truncated to (0, inf).
fn truncated_normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R, mean: F, std: F) -> F {
    if std == F::zero() {
        return mean;
    }
    loop {
        let v = mean + std * F::standard_normal(rng);
        if v > F::zero() {
            return v;
        }
    }
}

/// Sample a stochastic conductance array.
///
/// Dense forming draws every cell from Normal(mean, std) truncated at 0;
/// sparse forming first zeroes a seeded uniform subset of exactly
/// `round(sparsity * rows * cols)` cells. Deterministic given the seed.
pub fn sample_conductance<F: Scalar>(
    rows: usize,
    cols: usize,
    dist: ConductanceDist<F>,
    forming: Forming,
    seed: u64,
) -> Result<ConductanceArray<F>> {
    assert!(rows >= 1 && cols >= 1, "array needs rows, cols >= 1");
    assert!(dist.mean > F::zero(), "mean conductance must be positive");
    assert!(dist.std >= F::zero(), "conductance std must be non-negative");
    let sparsity = dist.sparsity.to_f64_c();
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::SparsityOutOfRange(sparsity));
    }
    let n = rows * cols;
    let mut rng = seed::rng(seed, 0x636F_6E64); // "cond"
    let mut g = Array2::zeros((rows, cols));
    match forming {
        Forming::Dense => {
            for v in g.iter_mut() {
                *v = truncated_normal(&mut rng, dist.mean, dist.std);
            }
        }
        Forming::Sparse => {
            let zeros = (sparsity * n as f64).round() as usize;
            let mut mask = vec![false; n];
            for idx in index_sample(&mut rng, n, zeros.min(n)) {
                mask[idx] = true;
            }
            for (i, v) in g.iter_mut().enumerate() {
                if !mask[i] {
                    *v = truncated_normal(&mut rng, dist.mean, dist.std);
                }
            }
        }
    }
    Ok(ConductanceArray {
        g: Arc::new(g),
        record: Some(GenRecord {
            forming,
            seed,
            dist,
        }),
    })
}

/// One-time multiplicative programming error: `g' = g * (1 + N(0, sigma))`
/// clamped at 0. Returns a new array; unformed (zero) cells stay zero.
pub fn apply_write_noise<F: Scalar>(
    arr: &ConductanceArray<F>,
    sigma_frac: F,
    seed: u64,
) -> ConductanceArray<F> {
    assert!(sigma_frac >= F::zero(), "sigma_frac must be non-negative");
    if sigma_frac == F::zero() {
        return arr.clone();
    }
    let mut rng = seed::rng(seed, 0x7772_6974); // "writ"
    let mut g = (*arr.g).clone();
    for v in g.iter_mut() {
        let eps = F::standard_normal(&mut rng);
        *v = (*v * (F::one() + sigma_frac * eps)).max(F::zero());
    }
    ConductanceArray {
        g: Arc::new(g),
        record: arr.record,
    }
}

/// A scaled differential-pair weight view over a shared conductance array.
///
/// Column `j` of the view pairs with column `j+1`:
/// `weights[i][j] = scale * (g[i][j+1] - g[i][j])`, so the weight matrix has
/// one fewer column than its conductance view.
#[derive(Debug, Clone)]
pub struct WeightBundle<F> {
    source: ConductanceArray<F>,
    row_range: Range<usize>,
    col_range: Range<usize>,
    scale: F,
    read_noise_std: F,
    /// Uniform ADC quantization of read weights, in bits; off by default.
    quantize_bits: Option<u8>,
    weights: Array2<F>,
}

/// Derive a differential-pair weight bundle from a window of the array.
pub fn differential_weights<F: Scalar>(
    arr: &ConductanceArray<F>,
    row_range: Range<usize>,
    col_range: Range<usize>,
    scale: F,
) -> Result<WeightBundle<F>> {
    if row_range.end > arr.rows()
        || col_range.end > arr.cols()
        || row_range.is_empty()
        || col_range.len() < 2
    {
        return Err(Error::ViewOutOfBounds {
            row_start: row_range.start,
            row_end: row_range.end,
            col_start: col_range.start,
            col_end: col_range.end,
            rows: arr.rows(),
            cols: arr.cols(),
        });
    }
    let weights = derive_weights(arr.matrix(), &row_range, &col_range, scale, None);
    Ok(WeightBundle {
        source: arr.clone(),
        row_range,
        col_range,
        scale,
        read_noise_std: F::zero(),
        quantize_bits: None,
        weights,
    })
}

fn derive_weights<F: Scalar>(
    g: &Array2<F>,
    row_range: &Range<usize>,
    col_range: &Range<usize>,
    scale: F,
    noise: Option<&Array2<F>>,
) -> Array2<F> {
    let out_rows = row_range.len();
    let out_cols = col_range.len() - 1;
    let mut w = Array2::zeros((out_rows, out_cols));
    for i in 0..out_rows {
        for j in 0..out_cols {
            let right = g[(row_range.start + i, col_range.start + j + 1)];
            let left = g[(row_range.start + i, col_range.start + j)];
            let (right, left) = match noise {
                Some(e) => (right + e[(i, j + 1)], left + e[(i, j)]),
                None => (right, left),
            };
            w[(i, j)] = scale * (right - left);
        }
    }
    w
}

impl<F: Scalar> WeightBundle<F> {
    /// Set the per-read conductance noise standard deviation (microsiemens).
    pub fn with_read_noise(mut self, std: F) -> Self {
        assert!(std >= F::zero(), "read noise std must be non-negative");
        self.read_noise_std = std;
        self
    }

    /// Quantize read weights uniformly to `bits` levels over
    /// `[-max|w|, +max|w|]`, modeling an ADC on the readout path.
    pub fn with_quantization(mut self, bits: u8) -> Self {
        assert!((1..=52).contains(&bits), "quantization bits out of range");
        self.quantize_bits = Some(bits);
        self
    }

    pub fn read_noise_std(&self) -> F {
        self.read_noise_std
    }

    pub fn scale(&self) -> F {
        self.scale
    }

    /// Noise-free derived weights.
    pub fn weights(&self) -> &Array2<F> {
        &self.weights
    }

    /// Output dimensions (rows, cols) of the weight matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.row_range.len(), self.col_range.len() - 1)
    }

    pub fn source(&self) -> &ConductanceArray<F> {
        &self.source
    }

    pub fn view_ranges(&self) -> (Range<usize>, Range<usize>) {
        (self.row_range.clone(), self.col_range.clone())
    }

    /// Read the weights with fresh additive conductance noise, sampled per
    /// view cell from N(0, read_noise_std). With zero noise and no
    /// quantization this returns the stored weights bit-exactly; identical
    /// trial seeds reproduce identical reads.
    pub fn read_weights(&self, trial_seed: u64) -> Array2<F> {
        let read = if self.read_noise_std == F::zero() {
            self.weights.clone()
        } else {
            let mut rng = seed::rng(trial_seed, 0x7265_6164); // "read"
            let e = Array2::from_shape_simple_fn(
                (self.row_range.len(), self.col_range.len()),
                || self.read_noise_std * F::standard_normal(&mut rng),
            );
            derive_weights(
                self.source.matrix(),
                &self.row_range,
                &self.col_range,
                self.scale,
                Some(&e),
            )
        };
        match self.quantize_bits {
            Some(bits) => quantize_symmetric(read, bits),
            None => read,
        }
    }
}

/// Round every entry to the nearest of `2^bits` uniform levels spanning
/// `[-max|w|, +max|w|]`.
fn quantize_symmetric<F: Scalar>(mut w: Array2<F>, bits: u8) -> Array2<F> {
    let max = w
        .iter()
        .fold(F::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
    if max == F::zero() {
        return w;
    }
    let levels = F::from_f64_c(((1u64 << bits) - 1) as f64);
    let step = (F::from_f64_c(2.0) * max) / levels;
    w.mapv_inplace(|v| ((v + max) / step).round() * step - max);
    w
}

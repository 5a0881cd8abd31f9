//! Bit extraction from conductance arrays and the two statistical
//! randomness tests applied to them (frequency/monobit and runs).

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weights::ConductanceArray;

/// p-value threshold below which a randomness test fails.
pub const PASS_THRESHOLD: f64 = 0.01;

/// Non-empty sequence of extracted bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(!bits.is_empty(), "bit string must be non-empty");
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        Self { bits }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// Threshold every cell against the median conductance: strictly greater
/// reads as 1, otherwise 0, in row-major order.
pub fn extract_bits<F: Scalar>(arr: &ConductanceArray<F>) -> BitString {
    let values: Vec<F> = arr.matrix().iter().copied().collect();
    assert!(values.len() >= 2, "need at least two cells");
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite conductances"));
    let n = sorted.len();
    let two = F::from_f64_c(2.0);
    let reference = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / two
    };
    let bits = values
        .iter()
        .map(|&v| if v > reference { 1u8 } else { 0u8 })
        .collect();
    BitString::new(bits)
}

/// Frequency (monobit) test: `S = sum(2*b - 1)`, `p = erfc(|S| / sqrt(2n))`.
/// The string passes when `p >= 0.01`.
pub fn monobit_test(bits: &BitString) -> Result<f64> {
    let n = bits.len();
    if n < 100 {
        return Err(Error::BitStringTooShort { got: n, need: 100 });
    }
    let s: i64 = bits
        .bits()
        .iter()
        .map(|&b| if b == 1 { 1i64 } else { -1i64 })
        .sum();
    let statistic = (s.abs() as f64) / ((2.0 * n as f64).sqrt());
    Ok(erfc(statistic))
}

/// Outcome of the runs test: the standard prerequisite `|pi - 1/2| < 2/sqrt(n)`
/// must hold before the statistic is meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunsOutcome {
    /// Prerequisite failed; no p-value is defined.
    NotApplicable { ones_fraction: f64 },
    /// p-value of the runs statistic.
    PValue(f64),
}

impl RunsOutcome {
    pub fn passes(&self) -> bool {
        matches!(self, RunsOutcome::PValue(p) if *p >= PASS_THRESHOLD)
    }

    pub fn p_value(&self) -> Option<f64> {
        match self {
            RunsOutcome::PValue(p) => Some(*p),
            RunsOutcome::NotApplicable { .. } => None,
        }
    }
}

/// Runs test: `V = 1 + sum(b_i != b_{i+1})`,
/// `p = erfc(|V - 2n*pi*(1-pi)| / (2*sqrt(2n)*pi*(1-pi)))`.
pub fn runs_test(bits: &BitString) -> Result<RunsOutcome> {
    let n = bits.len();
    if n < 100 {
        return Err(Error::BitStringTooShort { got: n, need: 100 });
    }
    let nf = n as f64;
    let pi = bits.ones() as f64 / nf;
    if (pi - 0.5).abs() >= 2.0 / nf.sqrt() {
        return Ok(RunsOutcome::NotApplicable { ones_fraction: pi });
    }
    let v = 1 + bits
        .bits()
        .windows(2)
        .filter(|w| w[0] != w[1])
        .count();
    let num = (v as f64 - 2.0 * nf * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * nf).sqrt() * pi * (1.0 - pi);
    Ok(RunsOutcome::PValue(erfc(num / den)))
}

use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-duration stream")]
    ZeroDurationStream,

    #[error("event stream invalid: {0}")]
    InvalidStream(String),

    #[error("pixel value {value} at index {index} outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f64 },

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("non-finite current at neuron {0}")]
    NonFiniteCurrent(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sparsity {0} outside [0, 1]")]
    SparsityOutOfRange(f64),

    #[error("view out of bounds: rows {row_start}..{row_end}, cols {col_start}..{col_end} on {rows}x{cols} array")]
    ViewOutOfBounds {
        row_start: usize,
        row_end: usize,
        col_start: usize,
        col_end: usize,
        rows: usize,
        cols: usize,
    },

    #[error("bit string too short: {got} bits, need at least {need}")]
    BitStringTooShort { got: usize, need: usize },

    #[error("zero-norm embedding at row {row} of {side} batch")]
    ZeroNormRow { side: &'static str, row: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty class {0}")]
    EmptyClass(usize),

    #[error("top-k rank {k} exceeds class count {classes}")]
    TopKOutOfRange { k: usize, classes: usize },

    #[error("zero throughput")]
    ZeroThroughput,

    #[error("zero denominator in cost ratio")]
    ZeroCostDenominator,

    #[error("missing component energy: {0}")]
    MissingComponentEnergy(String),

    #[error("bad file format: {0}")]
    BadFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

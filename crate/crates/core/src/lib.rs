//! Deterministic simulator core for memristive liquid-state-machine computing.
//!
//! The crate covers the full pipeline: event encoding of raw signals,
//! stochastic-conductance weight generation with differential-pair readout,
//! discrete-time LIF reservoir dynamics, trainable linear/contrastive heads,
//! prototype-based zero-shot classification, and analytic MAC/energy
//! accounting.
//!
//! Numeric code is generic over the [`Scalar`] floating-point type; the
//! aliases below pin the common `f64` instantiation used by the CLI harness.

pub mod contrastive;
pub mod cost;
pub mod error;
pub mod event;
pub mod lsm;
pub mod readout;
pub mod scalar;
pub mod seed;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Conductance array over `f64` microsiemens values.
pub type ConductanceArray64 = weights::ConductanceArray<f64>;
/// Differential-pair weight bundle over `f64`.
pub type WeightBundle64 = weights::WeightBundle<f64>;
/// LIF parameter set over `f64`.
pub type LifParams64 = lsm::LifParams<f64>;
/// Single-reservoir configuration over `f64`.
pub type LsmConfig64 = lsm::LsmConfig<f64>;
/// Linear readout layer over `f64`.
pub type LinearLayer64 = readout::LinearLayer<f64>;

//! Scalar abstraction for the numeric core.
//!
//! All dynamics, weight generation, and learning code is generic over a
//! floating-point scalar so the same simulator runs in `f32` or `f64`.
//! Concrete aliases for the common instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the simulator.
///
/// Extends `num_traits::Float` with seeded sampling hooks so generic code
/// can draw standard-normal and uniform variates without threading
/// distribution bounds through every signature.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Draw from the standard normal distribution N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from [0, 1).
    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless-enough conversion from `f64` for constants and config values.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widen to `f64` for reporting and serialization.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar fits in f64")
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn uniform_01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

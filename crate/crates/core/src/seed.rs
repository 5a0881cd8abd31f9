//! Seed derivation helpers.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds its
//! own ChaCha stream, so runs are reproducible across platforms and thread
//! counts. Sub-seeds are derived with SplitMix64 so that one named seed can
//! fan out to independent streams (per trial, per reservoir, per role)
//! without correlated low bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mix a base seed with a role/index tag into an independent sub-seed.
pub fn derive(base: u64, tag: u64) -> u64 {
    // SplitMix64 finalizer over the combined word.
    let mut z = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for a (base seed, tag) pair.
pub fn rng(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag))
}

//! Random streams.
//!
//! Every stochastic generator draws from ChaCha8 (`rand_chacha` 0.9) keyed by
//! `ChaCha8Rng::seed_from_u64(seed)`. Batch rows use the sub-seed
//! [`derive_seed`]`(base_seed, row)`, so row `i` of a batch is identical to a
//! single-series draw with that sub-seed no matter how many rows are generated.
//!
//! Reproducibility is guaranteed within this toolkit (same crate versions, any
//! platform); seeds are not interchangeable with other runtimes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for row `index` of a batch drawn with `base_seed`.
///
/// `splitmix64(base_seed + (index + 1) * GOLDEN_GAMMA) ^ splitmix64(base_seed)`,
/// all arithmetic wrapping.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let offset = index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA);
    splitmix64(base_seed.wrapping_add(offset)) ^ splitmix64(base_seed)
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

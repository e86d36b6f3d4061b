//! Counter-based RNG streams derived from 64-bit master seeds.
//!
//! A stream is a ChaCha8 generator keyed by the master seed with the stream
//! id selecting one of its 2^64 independent streams. Work items derive their
//! generator from `(seed, purpose, index)` so parallel and sequential runs
//! consume identical randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep unrelated consumers of one master seed apart.
pub mod purpose {
    pub const DEVIATION: u64 = 1;
    pub const SHOT_NOISE: u64 = 2;
    pub const BPC_BATCH: u64 = 3;
    pub const CALIBRATION: u64 = 4;
    pub const PHANTOM: u64 = 5;
    pub const DATASET: u64 = 6;
    pub const INIT: u64 = 7;
    pub const SHUFFLE: u64 = 8;
    pub const INJECTION: u64 = 9;
    pub const TRIAL: u64 = 10;
    pub const MASK: u64 = 11;
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, purpose));
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used where a seed (not a generator) must be recorded.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    mix(mix(seed, purpose), index.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

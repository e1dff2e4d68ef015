//! Seed derivation. Every random stream in a run is derived from one
//! explicitly configured base seed and a fixed stream tag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used across the crate.
pub mod stream {
    pub const SCHEDULE: u64 = 1;
    pub const PROFILES: u64 = 2;
    pub const CARRIER: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const JITTER: u64 = 5;
    pub const PROTOTYPES: u64 = 10;
    pub const NET_INIT: u64 = 20;
    pub const REPLAY: u64 = 21;
}

/// SplitMix64 finalizer applied to `seed ^ tag`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}

//! Seeded RNG streams. Every random draw in the crate goes through a stream
//! derived from a user seed and a fixed tag, so results depend only on
//! `(config, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Changing a value changes every result drawn from that stream.
pub mod stream {
    pub const SCM: u64 = 1;
    pub const GLYPHS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BATCHES: u64 = 5;
    pub const RANDOM_MATCH: u64 = 6;
    pub const FRACTION: u64 = 7;
    pub const EXTRA_PART: u64 = 8;
    pub const ORACLE_BATCHES: u64 = 9;
    pub const PHASE2: u64 = 10;
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(seed: u64, tag: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag))
}

//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a seed derived from the master seed and a stream path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for the stream addressed by `path` under `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream labels, so that differently-purposed streams never collide.
pub mod label {
    pub const SPLIT: u64 = 1;
    pub const FOREST: u64 = 2;
    pub const CV: u64 = 3;
    pub const FINAL: u64 = 4;
    pub const TREE: u64 = 5;
    pub const SCENE: u64 = 6;
    pub const WEATHER: u64 = 7;
    pub const CANOPY: u64 = 8;
    pub const SWP: u64 = 9;
    pub const NOISE: u64 = 10;
}

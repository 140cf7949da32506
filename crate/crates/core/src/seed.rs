//! Child-seed derivation.
//!
//! Every stochastic stage receives a seed derived from the experiment seed
//! and its *position* in the experiment (stage tag, run index, fold index),
//! never from scheduling order. The mixer is SplitMix64 applied once per path
//! element, so `child_seed(s, &[a, b])` differs from `child_seed(s, &[b, a])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags used as the first path element by the pipelines.
pub mod stage {
    pub const GENERATE: u64 = 1;
    pub const RANDOMIZE: u64 = 2;
    pub const MIXED_SPLIT: u64 = 3;
    pub const GRID_SEARCH: u64 = 4;
    pub const SFS: u64 = 5;
    pub const RAND_RUN: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` by folding in each path element.
pub fn child_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seeded generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

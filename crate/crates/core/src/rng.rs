//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by a 64-bit seed, and sub-tasks (bootstrap members, folds,
//! repeats) get their own streams through [`derive_seed`], so results never
//! depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `seed` and a stream label.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream labels used across modules, kept apart so that two components fed
/// the same base seed never share draws.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const BOOTSTRAP: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const LEARNER: u64 = 4;
    pub const SUBSAMPLE: u64 = 5;
    pub const PERTURB: u64 = 6;
    pub const RANDOM_FEATURE: u64 = 7;
    pub const SYNTH: u64 = 8;
    pub const SHAPLEY: u64 = 9;
    pub const BACKGROUND: u64 = 10;
    pub const RESIDUAL_MODEL: u64 = 11;
}

//! Index-derived random streams.
//!
//! Every random decision in a study is drawn from a stream whose seed is a
//! pure function of the root seed and a path of integer tags (family,
//! iteration, fold, tree, ...). Work can therefore be scheduled on any number
//! of threads without changing a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a tag path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &tag| mix(acc ^ mix(tag)))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Fisher-Yates shuffle driven by a stream.
pub fn shuffle<T>(rng: &mut StreamRng, items: &mut [T]) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Stream tags for the study stages.
pub mod tags {
    pub const SPLIT: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const SEARCH: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const REFIT: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
    pub const CANDIDATE_REFIT: u64 = 7;
}

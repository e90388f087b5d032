//! Counter-based seed derivation. Every trial draws from its own generator whose
//! seed depends only on `(base_seed, trial_index)`, so execution order never
//! changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all sampling.
pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `hash(base_seed, index)`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn rng_from_seed(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(base_seed: u64, index: u64) -> TrialRng {
    rng_from_seed(derive_seed(base_seed, index))
}

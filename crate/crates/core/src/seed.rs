//! Deterministic seed derivation for parallel work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random source used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for sub-task `index` of a job seeded with `master`.
///
/// `seed_r = mix64(mix64(master) ^ index)`; stable across platforms.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index)
}

/// Seed for a two-level index such as a (fold, grid point) cell.
pub fn derive_seed2(master: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(master, a), b)
}

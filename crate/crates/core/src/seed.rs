//! Deterministic seed derivation.
//!
//! Every random stage of the pipeline draws from its own ChaCha stream whose
//! seed is derived from the master seed and a stable label, so stages can be
//! reordered or skipped without perturbing each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a named stage. Stable across platforms and runs.
pub fn child_seed(master: u64, label: &str) -> u64 {
    let mut h = splitmix64(master);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

/// Child seed keyed by an index (bootstrap iteration, MC pass, sample row).
pub fn indexed_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// The stream cipher RNG used everywhere; seeding is the only entry point.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

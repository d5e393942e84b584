//! Deterministic child-seed derivation.
//!
//! Every grid cell gets its own seed from `(master, tag, parts...)` so that a
//! single cell can be replayed without running the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tag and an ordered tuple of integers into `master`.
pub fn derive(master: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    // separator so ("a", [1]) and ("a1", []) differ
    h = splitmix64(h ^ 0xFF);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a base seed
//! mixed with a small tuple of stream identifiers, so results never depend on
//! the order in which unrelated streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a list of stream ids.
pub fn derive(base: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(mix(base), |acc, &s| mix(acc ^ mix(s.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(base: u64, ids: &[u64]) -> Rng {
    seeded(derive(base, ids))
}

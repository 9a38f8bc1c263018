//! Seeded, splittable random streams.
//!
//! Every stochastic stage draws from its own stream derived from
//! `(seed, tag, index)`, so stages can be re-run or reordered without
//! perturbing each other's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derive an independent stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> Rng {
    let mixed = splitmix64(splitmix64(seed ^ fnv1a(tag)).wrapping_add(index));
    Rng::seed_from_u64(mixed)
}

/// Plain seeded generator.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

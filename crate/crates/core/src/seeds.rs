//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value derived from a master seed and a path of integer labels (trial
//! index, key, codeword index, ...). Derivation is a pure function, so results
//! do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The SplitMix64 finaliser.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a label.
#[inline]
pub fn derive(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Derive a child seed from `seed` and a path of labels.
pub fn derive_path(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(seed, |acc, &l| derive(acc, l))
}

/// Stable domain tags so unrelated streams never share a derivation path.
pub mod domain {
    pub const CODEWORD: u64 = 0x01;
    pub const PERMUTATION: u64 = 0x02;
    pub const KEY: u64 = 0x03;
    pub const TRIAL: u64 = 0x04;
    pub const JAMMER: u64 = 0x05;
    pub const CHANNEL: u64 = 0x06;
    pub const CSI: u64 = 0x07;
    pub const MESSAGE: u64 = 0x08;
    pub const DECODER: u64 = 0x09;
    pub const FAMILY: u64 = 0x0A;
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_path(seed, labels))
}

//! Seed derivation. Every random stream is an explicit ChaCha generator
//! seeded from a base seed and a stream label, so runs are reproducible
//! and independent streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a, used to key streams on strings such as user ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `seed` and a sequence of integer keys.
pub fn derive(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

/// Derives a child seed from `seed` and a label.
pub fn derive_str(seed: u64, label: &str) -> u64 {
    derive(seed, &[fnv1a(label.as_bytes())])
}

pub fn stream(seed: u64, label: &str) -> Rng {
    Rng::seed_from_u64(derive_str(seed, label))
}

pub fn stream_keyed(seed: u64, keys: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, keys))
}

//! Seed plumbing: every random choice in the crate draws from a named
//! substream of one base seed, so subsampling, window draws and
//! initialization are independently reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from (base, name, index). FNV-1a over the name with
/// a splitmix-style finalizer; stable across platforms.
pub fn substream_seed(base: u64, name: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut x = h ^ base.wrapping_mul(0x9e3779b97f4a7c15) ^ index.wrapping_add(0x632be59bd9b4e019);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

pub fn substream(base: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(base, name, index))
}

/// Fisher–Yates shuffle. `rand`'s own shuffle would do, but keeping the
/// loop explicit pins the byte-for-byte draw order this crate's
/// determinism contract relies on.
pub fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Sample `k` distinct indices from 0..n, returned sorted.
pub fn sample_without_replacement(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher–Yates: first k entries become the sample
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

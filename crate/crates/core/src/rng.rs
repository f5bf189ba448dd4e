//! Seed derivation and the random stream type used throughout a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type. ChaCha output is stable across platforms and
/// crate releases, which the byte-identical output contract relies on.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a master seed and a list of indices.
///
/// Used for per-run seeds (`derive_seed(master, &[STREAM, run])`) so that the
/// runs of one experiment are independent yet reproducible.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(master.wrapping_add(0x9e37_79b9_7f4a_7c15));
    for &p in parts {
        h = mix64(h ^ mix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

/// Stream tags keep scenario placement and in-run randomness apart even when
/// they share the master seed and run index.
pub mod stream {
    pub const SCENARIO: u64 = 1;
    pub const RUN: u64 = 2;
}

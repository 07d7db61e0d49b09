//! Counter-based random streams.
//!
//! Replication `i` of a run with master seed `s` draws from a ChaCha8 stream
//! keyed by `hash64(s, i)`. Streams have no sequential dependence, so the
//! order in which replications execute cannot change their draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for replication `index` under `master_seed`.
pub fn hash64(master_seed: u64, index: u64) -> u64 {
    let a = mix64(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    mix64(a ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93).rotate_left(17))
}

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(hash64(master_seed, index))
}

/// Derives a sub-seed for an independent sub-experiment (pilot runs,
/// repetitions of a larger experiment, ...).
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    let mut h = master_seed;
    for b in label.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    h
}

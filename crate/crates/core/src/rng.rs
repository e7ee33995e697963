//! Deterministic random streams.
//!
//! Every consumer derives its generator from a master seed, a short domain
//! tag and a replica index. The index selects a ChaCha stream, so replica
//! `i` sees the same numbers no matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a; stable across platforms and releases, unlike std's hasher.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// 256-bit key derived from (seed, tag).
pub fn derive_key(seed: u64, tag: &str) -> [u8; 32] {
    let mut state = splitmix(seed ^ splitmix(tag_hash(tag)));
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Generator for replica `index` of the experiment identified by `(seed, tag)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(seed, tag));
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when a replica needs to hand a seed to a
/// nested simulation.
pub fn child_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix(splitmix(seed ^ tag_hash(tag)) ^ splitmix(index.wrapping_add(1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, "x", 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, "x", 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, "x", 4), |r, _| Some(r.random())).collect();
        let d: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, "y", 3), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn child_seeds_differ() {
        assert_ne!(child_seed(1, "t", 0), child_seed(1, "t", 1));
        assert_eq!(child_seed(1, "t", 5), child_seed(1, "t", 5));
    }
}

//! Seeded, platform-stable random streams.
//!
//! Every random decision in an experiment draws from a ChaCha8 generator
//! whose key is derived from the experiment seed plus a small integer path
//! (repetition index, task index, iteration index, ...). Two calls with the
//! same seed and path yield bit-identical streams on every platform, so
//! split plans and per-iteration randomness do not depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, used to expand a seed path into key material.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a generator for the stream identified by `seed` and `path`.
///
/// The path elements are mixed into the key one at a time, so streams for
/// different paths are independent even when the raw integers collide after
/// concatenation.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x5851_f42d_4c95_7f2d;
    let _ = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93);
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

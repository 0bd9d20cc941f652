//! Seeded RNG plumbing.
//!
//! Every random choice in the pipeline flows from one base seed through a
//! named sub-stream, so components (split, init, shuffle, mask, ...) are
//! reproducible independently of one another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::hash::Fnv1a64;

/// Derives the 64-bit seed of a named sub-stream from the base seed.
pub fn stream_seed(base: u64, stream: &str) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(&base.to_le_bytes());
    h.update(stream.as_bytes());
    h.finish()
}

/// RNG for a named sub-stream of the base seed.
pub fn stream_rng(base: u64, stream: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(stream_seed(base, stream))
}

//! Reproducible random number streams.
//!
//! ChaCha is counter based: each `(experiment seed, stream)` pair names an
//! independent stream, so replicates can run in any order (or in parallel)
//! and still draw exactly the same values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for a whole experiment.
pub fn experiment_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for one replicate of an experiment.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Generator for a replicate of a sub-experiment (e.g. one `n` in a sweep).
///
/// Streams are disjoint across `(label, replicate)` pairs as long as
/// `replicate < 2^32`.
pub fn labeled_rng(seed: u64, label: u32, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((label as u64) << 32) | (replicate & 0xFFFF_FFFF));
    rng
}

/// Splitmix-style seed derivation for auxiliary randomized steps (e.g. the
/// clustering restarts inside one replicate).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut state = seed;
    for &part in parts {
        state ^= part.wrapping_add(0x9E37_79B9_7F4A_7C15);
        state = state.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        state ^= state >> 31;
    }
    state
}

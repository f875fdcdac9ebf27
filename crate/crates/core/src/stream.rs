//! Reproducible random streams.
//!
//! Every replicate draws from a ChaCha8 generator seeded by mixing its
//! identifying words (seed, cell key, ...) through SplitMix64. Sub-streams
//! for the population and the annotation step use ChaCha's stream counter,
//! so they never overlap and never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const POPULATION_STREAM: u64 = 0;
pub const ANNOTATION_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single 64-bit seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

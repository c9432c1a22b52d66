//! Deterministic randomness streams.
//!
//! A master seed and a stream index select an independent ChaCha20
//! substream, so parallel trials draw the same numbers regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

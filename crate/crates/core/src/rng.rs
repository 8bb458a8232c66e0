//! Seeded random streams.
//!
//! A master seed fixes the ChaCha key; each replicate (or Monte Carlo sample
//! block) reads its own stream id, so adding streams never perturbs the
//! numbers drawn by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` derived from `master_seed`.
pub fn substream(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id used for a given replicate and purpose tag.
pub fn stream_id(replicate: u64, tag: u8) -> u64 {
    (replicate << 8) | tag as u64
}

pub const TAG_ENVIRONMENT: u8 = 1;
pub const TAG_WALK: u8 = 2;
pub const TAG_VALLEY: u8 = 3;

//! Deterministic random sub-streams.
//!
//! Each run owns a base seed; data, noise and anything else random draw from
//! separate ChaCha streams of that seed so changing one consumer never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for [`substream`].
pub const STREAM_DATA: u64 = 1;
pub const STREAM_NOISE: u64 = 2;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

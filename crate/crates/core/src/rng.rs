//! Named, counter-based random streams.
//!
//! Every run derives independent ChaCha streams from one seed so that, for
//! example, evaluation draws never shift the exploration sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Env = 1,
    Explore = 2,
    Sample = 3,
    Init = 4,
    Eval = 5,
}

/// Generator for `stream` under run seed `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Generator keyed by an additional sub-index, e.g. one per evaluation point.
pub fn sub_stream_rng(seed: u64, stream: Stream, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(((index + 1) << 8) | stream as u64);
    rng
}

//! Reproducible random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), keyed
//! by the 64-bit master seed expanded with `seed_from_u64` and addressed by a
//! 64-bit stream id. ChaCha is counter based, so stream `k` can be opened
//! directly without generating streams `0..k`, and the output of a stream
//! does not depend on which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Opens stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

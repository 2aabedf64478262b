//! Seeded random number generation.
//!
//! Every sampler owns its generator. ChaCha8 is used throughout because its
//! stream is fixed across platforms and crate releases, which keeps traces
//! bit-identical for a given seed.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SimRng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a stream label.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

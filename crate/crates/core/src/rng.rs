//! Seeded random streams.
//!
//! Every run owns one base seed. Independent consumers (disturbances,
//! exploration noise, each controller) draw from separate ChaCha streams of
//! that seed so adding a consumer never shifts another consumer's samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers for the consumers inside one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Disturbance,
    Exploration,
    Controller(u64),
    Auxiliary(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Disturbance => 1,
            Stream::Exploration => 2,
            Stream::Controller(k) => (1 << 32) | (k & 0xffff_ffff),
            Stream::Auxiliary(k) => (2 << 32) | (k & 0xffff_ffff),
        }
    }
}

/// Returns the generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Plain seeded generator for tests and standalone optimizers.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

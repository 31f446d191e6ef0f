//! Seeded random streams.
//!
//! Every logical actor (master, each worker, each worker's latency clock, the
//! output selector) draws from its own ChaCha stream keyed by `(seed, stream id)`.
//! Streams never share state, so a run is reproducible regardless of the order
//! in which actors are serviced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    Master,
    Output,
    Data,
    Worker(usize),
    Latency(usize),
}

impl StreamId {
    fn code(self) -> u64 {
        match self {
            StreamId::Master => 1,
            StreamId::Output => 2,
            StreamId::Data => 3,
            StreamId::Worker(i) => (1 << 32) | i as u64,
            StreamId::Latency(i) => (2 << 32) | i as u64,
        }
    }
}

pub fn stream(seed: u64, id: StreamId) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id.code());
    rng
}

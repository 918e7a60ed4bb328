//! Deterministic random streams.
//!
//! Every stochastic component draws from a ChaCha8 generator keyed by the run
//! seed and a component-specific stream id, so adding draws in one component
//! never shifts another component's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream ids used across the crate.
pub mod streams {
    pub const POPULATION: u64 = 1;
    pub const INTERACTIONS: u64 = 2;
    pub const BEHAVIOR: u64 = 3;
    pub const NETWORK: u64 = 4;
    pub const PROBLEMS: u64 = 5;
    pub const LEDGER: u64 = 6;
    pub const MONTE_CARLO: u64 = 7;
}

//! Seeded random streams.
//!
//! Agent `i` of a run with master seed `s` draws from ChaCha8 keyed by `s`
//! on stream `i`. Streams are independent counters under one key, so adding
//! agents never changes the draws of existing ones. Topology generation uses
//! the reserved last stream of its own seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOPOLOGY_STREAM: u64 = u64::MAX;

pub fn agent_rng(master_seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(agent as u64);
    rng
}

pub fn agent_rngs(master_seed: u64, agents: usize) -> Vec<ChaCha8Rng> {
    (0..agents).map(|i| agent_rng(master_seed, i)).collect()
}

pub fn topology_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TOPOLOGY_STREAM);
    rng
}

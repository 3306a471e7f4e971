//! Seed derivation.
//!
//! Every sampler takes a single master seed. Independent components (labels,
//! edges, reveals, replicas, ...) draw from ChaCha streams selected by a fixed
//! stream offset and an index, so a component can be regenerated on its own
//! and results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream offsets for the components of an experiment.
pub mod stream {
    pub const LABELS: u64 = 1;
    pub const EDGES: u64 = 2;
    pub const REVEALS: u64 = 3;
    pub const CENTERS: u64 = 4;
    pub const TREE: u64 = 5;
    pub const POPULATION: u64 = 6;
    pub const ORACLE: u64 = 7;
}

/// Returns the generator for `(seed, stream, index)`.
pub fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(b"asym-sbm");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

//! Seeded, stream-addressable random number generation.
//!
//! A `(seed, stream)` pair always yields the same sequence, so independent
//! chains can be assigned distinct streams and run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type LabRng = ChaCha12Rng;

pub fn seeded(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

pub fn stream(seed: u64, index: u64) -> LabRng {
    let mut rng = LabRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

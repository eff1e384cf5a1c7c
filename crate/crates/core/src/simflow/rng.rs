//! Named random streams.
//!
//! Every `(seed, replication, purpose)` triple owns its own ChaCha stream, so
//! drawing more or fewer values from one purpose never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Purpose {
    Arrivals = 0,
    Service = 1,
    Noise = 2,
}

const PURPOSES: u64 = 3;

pub(crate) fn stream(seed: u64, replication: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

//! Counter-based random streams for reproducible parallel replication.
//!
//! Every replicate draws from its own ChaCha stream keyed by
//! `(seed, replicate index)`, so results do not depend on how the
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

pub fn replicate_rng(seed: u64, replicate: u64) -> ReplicateRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

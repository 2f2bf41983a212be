//! Seeded randomness. Every random choice in the crate flows from a `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for trial `index` of a campaign keyed by `master`.
///
/// ChaCha streams never overlap, so trials stay reproducible regardless of
/// which worker runs them or in what order.
pub fn trial_rng(master: u64, index: u64) -> SimRng {
    let mut rng = seeded(master);
    rng.set_stream(index);
    rng
}

/// Seed for trial `index`, for APIs that take a bare seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    use rand::RngCore;
    trial_rng(master, index).next_u64()
}

//! Seeded random streams.
//!
//! Every trial of a randomized suite draws from its own ChaCha stream keyed by
//! (seed, index), so results do not depend on execution order or on how many
//! other trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// The stream for trial `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A standard normal variate.
pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

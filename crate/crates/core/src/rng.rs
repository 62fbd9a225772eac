//! Seeded random streams. Every path owns independent streams derived from
//! `(base seed, path index, channel)`, so ensembles are reproducible and
//! independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Which noise a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Brownian motion `B` driving the temperature field.
    Field = 0,
    /// Brownian motion `W` driving the ice line.
    IceLine = 1,
    /// Anything else: i.i.d. draws for Monte Carlo oracles.
    Sampling = 2,
}

pub type PathRng = ChaCha8Rng;

pub fn stream(seed: u64, path: u64, channel: Channel) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(4).wrapping_add(channel as u64));
    rng
}

#[inline]
pub fn standard_normal(rng: &mut PathRng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` Brownian increments with step `dt`.
pub fn brownian_increments(rng: &mut PathRng, n: usize, dt: f64) -> Vec<f64> {
    let sd = dt.sqrt();
    (0..n).map(|_| sd * standard_normal(rng)).collect()
}

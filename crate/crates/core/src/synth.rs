//! Seeded synthetic weight matrices for fixtures, tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::WeightMatrix;
use crate::trit::Trit;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Standard normal entries.
///
/// Panics if `n` or `d` is zero.
pub fn gaussian(n: usize, d: usize, seed: u64) -> WeightMatrix {
    WeightMatrix::new(n, d, gaussian_vec(n * d, seed)).expect("non-empty shape")
}

pub fn zeros(n: usize, d: usize) -> WeightMatrix {
    WeightMatrix::zeros(n, d).expect("non-empty shape")
}

pub fn random_trit<R: Rng>(rng: &mut R) -> Trit {
    Trit::ALL[rng.random_range(0..3)]
}

/// Rows of the form `2·t₁ + t₂` with uniform random trits, so every entry is
/// in `{−3, …, 3}` and each row is exactly representable by two planes.
pub fn representable(n: usize, d: usize, seed: u64) -> WeightMatrix {
    let mut rng = rng(seed);
    let data = (0..n * d)
        .map(|_| 2.0 * random_trit(&mut rng).as_f64() + random_trit(&mut rng).as_f64())
        .collect();
    WeightMatrix::new(n, d, data).expect("non-empty shape")
}

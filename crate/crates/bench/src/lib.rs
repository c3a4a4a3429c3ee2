//! Shared fixtures for the benchmark targets.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use s3bo_core::dataset::{Dataset, OptMode};

/// Random regression dataset over `[-1.5, 1.5]^d` with a smooth target.
pub fn synthetic_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::new(d, OptMode::Minimize);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y = z.iter().map(|v| (1.3 * v).sin()).sum::<f64>();
        data.append(z, y).unwrap();
    }
    data
}

/// Random query rows.
pub fn query_points(q: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(q, d, |_, _| rng.random_range(-1.5..1.5))
}

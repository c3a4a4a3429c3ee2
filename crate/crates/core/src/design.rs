//! Space-filling designs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::bounds::BoxBounds;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Latin hypercube sample of `n` points over `bounds`.
///
/// Each coordinate axis is split into `n` equal-width strata and every stratum
/// receives exactly one point, with the position inside the stratum drawn
/// uniformly. Rows are points.
pub fn latin_hypercube(bounds: &BoxBounds, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::input("latin hypercube needs at least one point"));
    }
    let d = bounds.dim();
    let mut out = DMatrix::<f64>::zeros(n, d);
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        let (lo, w) = (bounds.lower[j], bounds.width(j));
        if w <= 0.0 {
            return Err(Error::input("degenerate box for latin hypercube"));
        }
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = rng.random_range(0.0..1.0);
            out[(i, j)] = lo + (s as f64 + u) / n as f64 * w;
        }
    }
    Ok(out)
}

/// Seeded convenience wrapper used wherever a design must be reproducible.
pub fn latin_hypercube_seeded(
    bounds: &BoxBounds,
    n: usize,
    base_seed: u64,
    tag: &str,
    index: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = rng_for(base_seed, tag, index);
    latin_hypercube(bounds, n, &mut rng)
}

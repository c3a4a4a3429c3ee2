//! Gaussian random embedding between the low-dimensional search box and the
//! high-dimensional problem box.
//!
//! A candidate `z` in `[-sqrt(d), sqrt(d)]^d` maps through `w = (1/d) A z`
//! with `A` a D x d standard-normal matrix, then through a per-coordinate
//! affine rescale onto the problem bounds, and finally through the box
//! projection (a componentwise clamp). The (1/d) scaling keeps roughly 91%
//! of embedded coordinates inside the unit pre-image, so only the remaining
//! tail ever hits the clamp.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Standard-normal matrix with independent entries.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random embedding from `R^d` into the problem box in `R^D`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    matrix: DMatrix<f64>,
    x_bounds: BoxBounds,
    seed: u64,
}

/// Draw a `D x d` embedding for the given problem bounds.
///
/// The matrix is reproducible bit for bit from the seed.
pub fn draw_embedding(
    dim_high: usize,
    dim_low: usize,
    x_bounds: &BoxBounds,
    seed: u64,
) -> Result<Embedding> {
    if dim_low == 0 || dim_high < dim_low {
        return Err(Error::input(format!(
            "embedding requires 1 <= d <= D, got d = {dim_low}, D = {dim_high}"
        )));
    }
    if x_bounds.dim() != dim_high {
        return Err(Error::input("problem bounds must have dimension D"));
    }
    let mut rng = rng_for(seed, "embedding", 0);
    Ok(Embedding {
        matrix: gaussian_matrix(dim_high, dim_low, &mut rng),
        x_bounds: x_bounds.clone(),
        seed,
    })
}

impl Embedding {
    pub fn dim_high(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim_low(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn x_bounds(&self) -> &BoxBounds {
        &self.x_bounds
    }

    /// Search box `[-sqrt(d), sqrt(d)]^d`.
    pub fn z_bounds(&self) -> BoxBounds {
        BoxBounds::embedded(self.dim_low())
    }

    /// Embedded image before the box projection: affine in `z`.
    pub fn embed_pre_clamp(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim_low() {
            return Err(Error::input(format!(
                "expected a {}-dimensional point, got {}",
                self.dim_low(),
                z.len()
            )));
        }
        let zv = DVector::from_row_slice(z);
        let w = &self.matrix * zv / self.dim_low() as f64;
        let root_d = (self.dim_low() as f64).sqrt();
        Ok((0..self.dim_high())
            .map(|i| {
                self.x_bounds.lower[i]
                    + (w[i] + root_d) / (2.0 * root_d) * self.x_bounds.width(i)
            })
            .collect())
    }

    /// Map a search point into the problem box: embed, rescale, project.
    pub fn embed_to_x(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.embed_pre_clamp(z)?;
        self.x_bounds.clamp(&mut x);
        Ok(x)
    }
}

/// Monte-Carlo statistics of one embedded coordinate under uniform sampling
/// of `z` over the search box.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingStats {
    /// Fraction of coordinates inside the unit pre-image, i.e. the fraction
    /// that survives the box projection untouched.
    pub prob_in_unit: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Sample the distribution of one coordinate of the embedded image.
///
/// Conditioned on the search point `z`, one coordinate of `A z` is a
/// standard normal scaled by `|z|`; each sample therefore draws a fresh
/// normal magnitude together with the point's scale fraction, uniform on the
/// unit interval. The `1/d` rescale cancels the `sqrt(d)` box radius, so the
/// scaled coordinate is normal times `U[-1, 1]` (mean 0, variance 1/3, about
/// 90.6% inside the unit interval) while the unscaled one stretches by `d`
/// and escapes the interval almost surely in high dimension. Deterministic
/// given the seed.
pub fn mc_embedding_stats(d: usize, n_samples: usize, seed: u64, scaled: bool) -> Result<EmbeddingStats> {
    if d == 0 {
        return Err(Error::input("dimension must be positive"));
    }
    if n_samples < 10_000 {
        return Err(Error::input("at least 10^4 samples are required"));
    }
    let mut rng = rng_for(seed, "mc-bounds", 0);
    let stretch = if scaled { 1.0 } else { d as f64 };
    let mut inside = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let a: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random_range(-1.0..1.0);
        let w = a * u * stretch;
        if (-1.0..=1.0).contains(&w) {
            inside += 1;
        }
        sum += w;
        sum_sq += w * w;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    Ok(EmbeddingStats {
        prob_in_unit: inside as f64 / n,
        mean,
        variance: sum_sq / n - mean * mean,
    })
}

/// Probability that an embedded coordinate needs no projection.
pub fn mc_bound_probability(d: usize, n_samples: usize, seed: u64, scaled: bool) -> Result<f64> {
    Ok(mc_embedding_stats(d, n_samples, seed, scaled)?.prob_in_unit)
}

/// Find `z` whose image matches `x_top` on the span of `basis`.
///
/// Solves `basis^T A z = basis^T x_top` in the least-squares sense. Used to
/// certify that an embedding instance can reach a point of the effective
/// subspace; the component orthogonal to the basis is unconstrained.
pub fn effective_subspace_witness(
    basis: &DMatrix<f64>,
    embedding: &Embedding,
    x_top: &[f64],
) -> Result<Vec<f64>> {
    if basis.nrows() != embedding.dim_high() || x_top.len() != embedding.dim_high() {
        return Err(Error::input("basis and target must live in R^D"));
    }
    if basis.ncols() > embedding.dim_low() {
        return Err(Error::input(
            "embedding dimension must be at least the subspace dimension",
        ));
    }
    let projected = basis.transpose() * embedding.matrix();
    let target = basis.transpose() * DVector::from_row_slice(x_top);
    let svd = projected.clone().svd(true, true);
    let z = svd
        .solve(&target, 1e-12)
        .map_err(Error::numerical)?;
    let residual = (&projected * &z - &target).norm();
    if residual > 1e-8 * target.norm().max(1.0) {
        return Err(Error::numerical(format!(
            "projected system is rank deficient, residual {residual:e}"
        )));
    }
    Ok(z.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit_bounds(d: usize) -> BoxBounds {
        BoxBounds::cube(d, -1.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(draw_embedding(2, 4, &unit_bounds(2), 0).is_err());
        assert!(draw_embedding(4, 0, &unit_bounds(4), 0).is_err());
        assert!(draw_embedding(4, 2, &unit_bounds(3), 0).is_err());
    }

    #[test]
    fn same_seed_gives_identical_matrix() {
        let a = draw_embedding(50, 3, &unit_bounds(50), 7).unwrap();
        let b = draw_embedding(50, 3, &unit_bounds(50), 7).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = draw_embedding(50, 3, &unit_bounds(50), 8).unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn entries_have_standard_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let big = gaussian_matrix(10_000, 4, &mut rng);
        for j in 0..4 {
            let col = big.column(j);
            let mean = col.sum() / 10_000.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 10_000.0;
            assert!(mean.abs() < 0.05, "col {j} mean {mean}");
            assert!((0.9..=1.1).contains(&var), "col {j} var {var}");
        }
        // Scalar draw: the mean over many redraws vanishes.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn center_maps_to_midpoint_exactly() {
        let bounds = BoxBounds::new(vec![-3.0, 0.0, 1.0], vec![1.0, 10.0, 2.0]).unwrap();
        let e = draw_embedding(3, 2, &bounds, 1).unwrap();
        let x = e.embed_to_x(&[0.0, 0.0]).unwrap();
        assert_eq!(x, bounds.midpoint());
    }

    #[test]
    fn out_of_box_image_clamps_to_face() {
        let bounds = unit_bounds(1);
        let mut e = draw_embedding(1, 1, &bounds, 1).unwrap();
        e.matrix[(0, 0)] = 3.0;
        // w = 3 * 0.9 > sqrt(1), so the affine image exceeds the upper bound.
        let x = e.embed_to_x(&[0.9]).unwrap();
        assert_eq!(x[0], 1.0);
        let pre = e.embed_pre_clamp(&[0.9]).unwrap();
        assert!(pre[0] > 1.0);
    }

    #[test]
    fn matches_hand_rolled_affine_oracle() {
        let bounds = BoxBounds::new(vec![-2.0, 1.0, 0.0], vec![2.0, 3.0, 5.0]).unwrap();
        let e = draw_embedding(3, 2, &bounds, 21).unwrap();
        let z = [0.7, -1.1];
        let x = e.embed_to_x(&z).unwrap();
        let root_d = 2f64.sqrt();
        for i in 0..3 {
            let w = (e.matrix()[(i, 0)] * z[0] + e.matrix()[(i, 1)] * z[1]) / 2.0;
            let expected = (bounds.lower[i] + (w + root_d) / (2.0 * root_d) * bounds.width(i))
                .clamp(bounds.lower[i], bounds.upper[i]);
            assert!((x[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pre_clamp_image_is_affine_in_z() {
        let bounds = BoxBounds::cube(4, -5.0, 5.0).unwrap();
        let e = draw_embedding(4, 2, &bounds, 33).unwrap();
        let z1 = [0.8, -0.4];
        let z2 = [-1.2, 1.0];
        for alpha in [0.0, 0.3, 0.7, 1.0] {
            let mix: Vec<f64> = z1
                .iter()
                .zip(&z2)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect();
            let im = e.embed_pre_clamp(&mix).unwrap();
            let im1 = e.embed_pre_clamp(&z1).unwrap();
            let im2 = e.embed_pre_clamp(&z2).unwrap();
            for i in 0..4 {
                let expected = alpha * im1[i] + (1.0 - alpha) * im2[i];
                assert!((im[i] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_coordinate_moments_for_d_one() {
        let stats = mc_embedding_stats(1, 200_000, 5, true).unwrap();
        assert!(stats.mean.abs() < 0.01, "mean {}", stats.mean);
        assert!(
            (stats.variance - 1.0 / 3.0).abs() < 0.01,
            "variance {}",
            stats.variance
        );
    }

    #[test]
    fn scaled_probability_sits_near_ninety_percent() {
        let p = mc_bound_probability(10, 100_000, 6, true).unwrap();
        assert!((0.90..=0.912).contains(&p), "p = {p}");
    }

    #[test]
    fn unscaled_probability_collapses_in_high_dimension() {
        let p = mc_bound_probability(1000, 50_000, 7, false).unwrap();
        assert!(p < 0.01, "p = {p}");
    }

    #[test]
    fn sample_count_floor_is_enforced() {
        assert!(mc_bound_probability(3, 100, 0, true).is_err());
    }

    #[test]
    fn witness_reaches_projected_target() {
        let bounds = BoxBounds::cube(20, -1.0, 1.0).unwrap();
        let e = draw_embedding(20, 2, &bounds, 9).unwrap();
        // Effective direction: first coordinate axis.
        let mut basis = DMatrix::<f64>::zeros(20, 1);
        basis[(0, 0)] = 1.0;
        let mut x_top = vec![0.0; 20];
        x_top[0] = 0.37;
        let z = effective_subspace_witness(&basis, &e, &x_top).unwrap();
        let image = &*e.matrix() * DVector::from_row_slice(&z);
        assert!((image[0] - 0.37).abs() < 1e-8);
    }

    #[test]
    fn zero_target_admits_zero_witness() {
        let bounds = BoxBounds::cube(10, -1.0, 1.0).unwrap();
        let e = draw_embedding(10, 3, &bounds, 10).unwrap();
        let basis = DMatrix::<f64>::identity(10, 2);
        let z = effective_subspace_witness(&basis, &e, &vec![0.0; 10]).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn random_projection_preserves_pairwise_distances() {
        // n = 50 points in R^200, eps = 0.4, d from the 9 log n / (eps^2 - eps^3)
        // bound; at least half of the seeded trials must preserve every
        // pairwise squared distance within (1 +/- eps).
        let n = 50;
        let dim = 200;
        let eps = 0.4f64;
        let d = ((9.0 * (n as f64).ln()) / (eps * eps - eps * eps * eps)).ceil() as usize;
        let mut successes = 0;
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let points = gaussian_matrix(n, dim, &mut rng);
            let a = gaussian_matrix(dim, d, &mut rng);
            let projected = &points * &a / (d as f64).sqrt();
            let mut ok = true;
            'pairs: for i in 0..n {
                for j in 0..i {
                    let orig = (points.row(i) - points.row(j)).norm_squared();
                    let proj = (projected.row(i) - projected.row(j)).norm_squared();
                    if proj < (1.0 - eps) * orig || proj > (1.0 + eps) * orig {
                        ok = false;
                        break 'pairs;
                    }
                }
            }
            if ok {
                successes += 1;
            }
        }
        assert!(successes >= 10, "only {successes} of 20 trials preserved distances");
    }
}

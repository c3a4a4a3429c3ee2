//! Closed-form test objectives with known low-dimensional structure, plus an
//! optional simulated evaluation delay.
//!
//! The three ZDT variants take the second objective of the classic suite,
//! squared in the coupling term so the domain recenters on `[-1, 1]^D`. As
//! published, their `g` couplings differ in normalization; `normalize_g`
//! switches all three to the `(D-1)`-normalized form for cross-comparison.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkName {
    Zdt1Mod,
    Zdt2Mod,
    Zdt3Mod,
    Sphere,
    SphereGeneral,
    Hartmann4,
}

impl BenchmarkName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zdt1" => Ok(BenchmarkName::Zdt1Mod),
            "zdt2" => Ok(BenchmarkName::Zdt2Mod),
            "zdt3" => Ok(BenchmarkName::Zdt3Mod),
            "sphere" => Ok(BenchmarkName::Sphere),
            "sphere-general" | "sphere_general" => Ok(BenchmarkName::SphereGeneral),
            "hartmann4" => Ok(BenchmarkName::Hartmann4),
            other => Err(Error::config(format!("unknown benchmark '{other}'"))),
        }
    }
}

const HARTMANN_A: [[f64; 4]; 4] = [
    [10.0, 3.0, 17.0, 3.50],
    [0.05, 10.0, 17.0, 0.1],
    [3.0, 3.5, 1.7, 10.0],
    [17.0, 8.0, 0.05, 10.0],
];

const HARTMANN_P: [[f64; 4]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124],
    [0.2329, 0.4135, 0.8307, 0.3736],
    [0.2348, 0.1451, 0.3522, 0.2883],
    [0.4047, 0.8828, 0.8732, 0.5743],
];

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

/// A benchmark instance: objective, dimension, bounds, optional delay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    name: BenchmarkName,
    dim: usize,
    bounds: BoxBounds,
    /// Uniform sleep interval in seconds, drawn per evaluation.
    delay: Option<(f64, f64)>,
    /// Effective directions for the generalized sphere, one row per factor.
    weights: Option<Vec<Vec<f64>>>,
    normalize_g: bool,
}

impl BenchmarkSpec {
    pub fn new(name: BenchmarkName, dim: usize) -> Result<Self> {
        let bounds = match name {
            BenchmarkName::Zdt1Mod | BenchmarkName::Zdt2Mod | BenchmarkName::Zdt3Mod => {
                if dim < 2 {
                    return Err(Error::input("ZDT benchmarks need at least two dimensions"));
                }
                BoxBounds::cube(dim, -1.0, 1.0)?
            }
            BenchmarkName::Sphere | BenchmarkName::SphereGeneral => {
                if dim == 0 {
                    return Err(Error::input("sphere needs a positive dimension"));
                }
                BoxBounds::cube(dim, -1.0, 1.0)?
            }
            BenchmarkName::Hartmann4 => {
                if dim != 4 {
                    return Err(Error::input("the Hartmann benchmark is four-dimensional"));
                }
                BoxBounds::cube(4, 0.0, 1.0)?
            }
        };
        Ok(BenchmarkSpec {
            name,
            dim,
            bounds,
            delay: None,
            weights: None,
            normalize_g: false,
        })
    }

    pub fn with_delay(mut self, lower_s: f64, upper_s: f64) -> Result<Self> {
        if !(0.0 <= lower_s && lower_s <= upper_s) {
            return Err(Error::input("delay interval must satisfy 0 <= lower <= upper"));
        }
        self.delay = Some((lower_s, upper_s));
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Result<Self> {
        if self.name != BenchmarkName::SphereGeneral {
            return Err(Error::input("weights only apply to the generalized sphere"));
        }
        if weights.is_empty() || weights.iter().any(|w| w.len() != self.dim) {
            return Err(Error::input("each weight row must have the benchmark dimension"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_normalized_g(mut self, on: bool) -> Self {
        self.normalize_g = on;
        self
    }

    pub fn name(&self) -> BenchmarkName {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn delay(&self) -> Option<(f64, f64)> {
        self.delay
    }

    fn coupling(&self, x: &[f64]) -> f64 {
        let tail: f64 = x[1..].iter().sum();
        let d = self.dim as f64;
        match (self.name, self.normalize_g) {
            (BenchmarkName::Zdt1Mod, _) => {
                let s = tail / (d - 1.0);
                1.0 + 9.0 * s * s
            }
            (BenchmarkName::Zdt2Mod, false) => {
                let s = 9.0 * tail;
                1.0 + s * s
            }
            (BenchmarkName::Zdt3Mod, false) => 1.0 + 9.0 * tail * tail,
            (BenchmarkName::Zdt2Mod | BenchmarkName::Zdt3Mod, true) => {
                let s = tail / (d - 1.0);
                1.0 + 9.0 * s * s
            }
            _ => unreachable!("coupling is only defined for the ZDT variants"),
        }
    }

    /// Noise-free objective value.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "expected {} coordinates, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok(match self.name {
            BenchmarkName::Zdt1Mod => {
                let g = self.coupling(x);
                g * (1.0 - (x[0] * x[0] / g).sqrt())
            }
            BenchmarkName::Zdt2Mod => {
                let g = self.coupling(x);
                let t = x[0] / g;
                g * (1.0 - t * t)
            }
            BenchmarkName::Zdt3Mod => {
                let g = self.coupling(x);
                let u = x[0] * x[0];
                g * (1.0 - (u / g).sqrt() - (u / g) * (10.0 * std::f64::consts::PI * u).sin())
            }
            BenchmarkName::Sphere => {
                let s: f64 = x.iter().sum();
                s * s
            }
            BenchmarkName::SphereGeneral => {
                let weights = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::input("generalized sphere needs weights"))?;
                weights
                    .iter()
                    .map(|w| {
                        let s: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                        s * s
                    })
                    .product()
            }
            BenchmarkName::Hartmann4 => {
                let mut acc = 0.0;
                for i in 0..4 {
                    let mut inner = 0.0;
                    for j in 0..4 {
                        let dx = x[j] - HARTMANN_P[i][j];
                        inner += HARTMANN_A[i][j] * dx * dx;
                    }
                    acc += HARTMANN_ALPHA[i] * (-inner).exp();
                }
                (1.1 - acc) / 0.839
            }
        })
    }

    /// Evaluate with the configured random delay, mimicking an expensive
    /// simulation. The value itself is deterministic; only timing varies.
    pub fn evaluate(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        let y = self.value(x)?;
        if let Some((lo, hi)) = self.delay {
            let t = if hi > lo { rng.random_range(lo..hi) } else { lo };
            if t > 0.0 {
                std::thread::sleep(std::time::Duration::from_secs_f64(t));
            }
        }
        Ok(y)
    }

    /// Unit vectors spanning the directions the objective actually varies
    /// along. Errors for the Hartmann function, which declares none.
    pub fn effective_subspace(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let normalize = |mut v: Vec<f64>| {
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
            v
        };
        match self.name {
            BenchmarkName::Zdt1Mod | BenchmarkName::Zdt2Mod | BenchmarkName::Zdt3Mod => {
                let mut e1 = vec![0.0; d];
                e1[0] = 1.0;
                let mut rest = vec![1.0; d];
                rest[0] = 0.0;
                Ok(vec![e1, normalize(rest)])
            }
            BenchmarkName::Sphere => Ok(vec![normalize(vec![1.0; d])]),
            BenchmarkName::SphereGeneral => {
                let weights = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::input("generalized sphere needs weights"))?;
                Ok(weights.iter().cloned().map(normalize).collect())
            }
            BenchmarkName::Hartmann4 => Err(Error::input(
                "the Hartmann benchmark declares no low effective dimension",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zdt1_vanishes_at_documented_optimizer() {
        let b = BenchmarkSpec::new(BenchmarkName::Zdt1Mod, 30).unwrap();
        let mut x = vec![0.0; 30];
        x[0] = 1.0;
        assert_eq!(b.value(&x).unwrap(), 0.0);
        x[0] = -1.0;
        assert_eq!(b.value(&x).unwrap(), 0.0, "sign symmetry of the squared term");
    }

    #[test]
    fn zdt2_hand_evaluation() {
        let b = BenchmarkSpec::new(BenchmarkName::Zdt2Mod, 10).unwrap();
        let mut x = vec![0.0; 10];
        x[0] = 0.5;
        assert!((b.value(&x).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zdt3_matches_formula_at_a_point() {
        let b = BenchmarkSpec::new(BenchmarkName::Zdt3Mod, 5).unwrap();
        let x = [0.6, 0.1, -0.2, 0.05, 0.0];
        let tail: f64 = 0.1 - 0.2 + 0.05;
        let g: f64 = 1.0 + 9.0 * tail * tail;
        let u: f64 = 0.36;
        let expected =
            g * (1.0 - (u / g).sqrt() - (u / g) * (10.0 * std::f64::consts::PI * u).sin());
        assert!((b.value(&x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn sphere_plug_in_values() {
        let b = BenchmarkSpec::new(BenchmarkName::Sphere, 100).unwrap();
        assert_eq!(b.value(&vec![0.0; 100]).unwrap(), 0.0);
        assert_eq!(b.value(&vec![1.0; 100]).unwrap(), 10_000.0);
    }

    #[test]
    fn hartmann_minimum_matches_multistart_oracle() {
        // Frozen from a 10^4-start dense refinement of the closed form.
        let b = BenchmarkSpec::new(BenchmarkName::Hartmann4, 4).unwrap();
        let x_star = [0.18739527, 0.19415153, 0.55791778, 0.26477962];
        let f_star = b.value(&x_star).unwrap();
        assert!((f_star - (-3.1344941412)).abs() < 1e-6, "got {f_star}");
    }

    #[test]
    fn wrong_length_is_rejected() {
        let b = BenchmarkSpec::new(BenchmarkName::Sphere, 3).unwrap();
        assert!(b.value(&[0.0, 0.0]).is_err());
        assert!(BenchmarkSpec::new(BenchmarkName::Hartmann4, 5).is_err());
    }

    #[test]
    fn effective_subspace_directions() {
        let zdt = BenchmarkSpec::new(BenchmarkName::Zdt1Mod, 6).unwrap();
        let dirs = zdt.effective_subspace().unwrap();
        assert_eq!(dirs.len(), 2);
        let dot: f64 = dirs[0].iter().zip(&dirs[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12, "directions must be orthogonal");

        let sphere = BenchmarkSpec::new(BenchmarkName::Sphere, 4).unwrap();
        let dirs = sphere.effective_subspace().unwrap();
        assert_eq!(dirs.len(), 1);
        assert!((dirs[0][0] - 0.5).abs() < 1e-12);

        let gen = BenchmarkSpec::new(BenchmarkName::SphereGeneral, 3)
            .unwrap()
            .with_weights(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(gen.effective_subspace().unwrap().len(), 3);

        assert!(BenchmarkSpec::new(BenchmarkName::Hartmann4, 4)
            .unwrap()
            .effective_subspace()
            .is_err());
    }

    #[test]
    fn orthogonal_perturbations_leave_value_unchanged() {
        use crate::embedding::gaussian_matrix;
        use nalgebra::DVector;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for name in [
            BenchmarkName::Zdt1Mod,
            BenchmarkName::Zdt2Mod,
            BenchmarkName::Zdt3Mod,
            BenchmarkName::Sphere,
        ] {
            let d = 12;
            let b = BenchmarkSpec::new(name, d).unwrap();
            let dirs = b.effective_subspace().unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
                // Random direction projected off the effective subspace.
                let raw = gaussian_matrix(d, 1, &mut rng);
                let mut perp = DVector::from_fn(d, |i, _| raw[(i, 0)]);
                for dir in &dirs {
                    let dv = DVector::from_row_slice(dir);
                    let c = perp.dot(&dv);
                    perp -= dv * c;
                }
                if perp.norm() < 1e-9 {
                    continue;
                }
                perp = &perp / perp.norm() * 1e-3;
                let shifted: Vec<f64> = x.iter().zip(perp.iter()).map(|(a, p)| a + p).collect();
                let delta = (b.value(&x).unwrap() - b.value(&shifted).unwrap()).abs();
                assert!(delta <= 1e-9, "{name:?} moved by {delta}");
            }
        }
    }

    #[test]
    fn sphere_nonnegative_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let b = BenchmarkSpec::new(BenchmarkName::Sphere, 5).unwrap();
        let g = BenchmarkSpec::new(BenchmarkName::SphereGeneral, 5)
            .unwrap()
            .with_weights(vec![vec![0.3, -0.2, 0.9, 0.0, 0.4]; 2])
            .unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(b.value(&x).unwrap() >= 0.0);
            assert!(g.value(&x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn delay_is_applied_and_mean_is_centered() {
        let b = BenchmarkSpec::new(BenchmarkName::Sphere, 2)
            .unwrap()
            .with_delay(0.001, 0.003)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let start = std::time::Instant::now();
        let reps = 20;
        for _ in 0..reps {
            b.evaluate(&[0.1, 0.1], &mut rng).unwrap();
        }
        let elapsed = start.elapsed().as_secs_f64();
        // Mean delay 2 ms: generous bands to survive scheduler jitter.
        assert!(elapsed >= reps as f64 * 0.001);
        assert!(elapsed < reps as f64 * 0.02, "took {elapsed}s");
    }

    #[test]
    fn normalized_coupling_aligns_the_three_variants() {
        let mut x = vec![0.1; 8];
        x[0] = 0.3;
        let g_of = |name| {
            BenchmarkSpec::new(name, 8)
                .unwrap()
                .with_normalized_g(true)
                .coupling(&x)
        };
        let g1 = g_of(BenchmarkName::Zdt1Mod);
        let g2 = g_of(BenchmarkName::Zdt2Mod);
        let g3 = g_of(BenchmarkName::Zdt3Mod);
        assert_eq!(g1, g2);
        assert_eq!(g2, g3);
    }
}

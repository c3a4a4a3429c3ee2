//! Stationary covariance kernels shared by the dense and sparse models.
//!
//! All four families are functions of the scaled distance
//! `r = ||(x - x') / l||_2`, where the lengthscale vector `l` has either one
//! entry (isotropic) or one entry per input dimension (ARD):
//!
//! * `Matern12`: `a^2 exp(-r)`
//! * `Matern32`: `a^2 exp(-sqrt(3) r) (1 + sqrt(3) r)`
//! * `Matern52`: `a^2 exp(-sqrt(5) r) (1 + sqrt(5) r + 5/3 r^2)`
//! * `SqExp`:    `a^2 exp(-r^2 / 2)`

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern12,
    Matern32,
    Matern52,
    SqExp,
}

impl KernelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "matern12" | "matern1" => Ok(KernelFamily::Matern12),
            "matern32" | "matern3" => Ok(KernelFamily::Matern32),
            "matern52" | "matern5" => Ok(KernelFamily::Matern52),
            "sqexp" | "sq-exp" | "rbf" => Ok(KernelFamily::SqExp),
            other => Err(Error::config(format!("unknown kernel family '{other}'"))),
        }
    }

    /// Correlation at scaled distance `r`, in (0, 1].
    fn correlation(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern12 => (-r).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * r;
                (-s).exp() * (1.0 + s)
            }
            KernelFamily::Matern52 => {
                let s = 5f64.sqrt() * r;
                (-s).exp() * (1.0 + s + 5.0 / 3.0 * r * r)
            }
            KernelFamily::SqExp => (-0.5 * r * r).exp(),
        }
    }
}

/// Kernel family plus hyperparameters.
///
/// Immutable once constructed; evaluation is pure, so a spec can be shared
/// freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    amplitude: f64,
    lengthscales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, amplitude: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::input("kernel amplitude must be finite and positive"));
        }
        if lengthscales.is_empty() {
            return Err(Error::input("at least one lengthscale is required"));
        }
        if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::input("lengthscales must be finite and positive"));
        }
        Ok(KernelSpec {
            family,
            amplitude,
            lengthscales,
        })
    }

    /// Isotropic spec with a single lengthscale.
    pub fn isotropic(family: KernelFamily, amplitude: f64, lengthscale: f64) -> Result<Self> {
        KernelSpec::new(family, amplitude, vec![lengthscale])
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    /// Prior variance `k(x, x) = amplitude^2`.
    pub fn prior_variance(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    /// Diagonal jitter added before Cholesky factorizations.
    pub fn jitter(&self) -> f64 {
        1e-10 * self.prior_variance()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if self.lengthscales.len() != 1 && self.lengthscales.len() != width {
            return Err(Error::input(format!(
                "lengthscale count {} incompatible with input dimension {width}",
                self.lengthscales.len()
            )));
        }
        Ok(())
    }

    fn scaled_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        if self.lengthscales.len() == 1 {
            let inv = 1.0 / self.lengthscales[0];
            for (a, b) in x.iter().zip(y) {
                let d = (a - b) * inv;
                s += d * d;
            }
        } else {
            for ((a, b), l) in x.iter().zip(y).zip(&self.lengthscales) {
                let d = (a - b) / l;
                s += d * d;
            }
        }
        s.sqrt()
    }
}

/// Evaluate `k(x, x')`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "kernel inputs have mismatched lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    spec.check_width(x.len())?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("kernel inputs must be finite"));
    }
    let r = spec.scaled_distance(x, y);
    Ok(spec.prior_variance() * spec.family.correlation(r))
}

/// Cross-covariance matrix with entry `(i, j) = k(rows_a[i], rows_b[j])`.
pub fn kernel_matrix(
    spec: &KernelSpec,
    rows_a: &DMatrix<f64>,
    rows_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if rows_a.ncols() != rows_b.ncols() {
        return Err(Error::input(format!(
            "kernel matrix inputs have mismatched widths {} and {}",
            rows_a.ncols(),
            rows_b.ncols()
        )));
    }
    spec.check_width(rows_a.ncols())?;
    let (n, q) = (rows_a.nrows(), rows_b.nrows());
    if n == 0 || q == 0 {
        return Err(Error::input("kernel matrix inputs must be nonempty"));
    }
    let amp2 = spec.prior_variance();
    let mut out = DMatrix::<f64>::zeros(n, q);
    for i in 0..n {
        let xi: Vec<f64> = rows_a.row(i).iter().copied().collect();
        for j in 0..q {
            let xj: Vec<f64> = rows_b.row(j).iter().copied().collect();
            let r = spec.scaled_distance(&xi, &xj);
            out[(i, j)] = amp2 * spec.family.correlation(r);
        }
    }
    Ok(out)
}

/// Symmetric kernel matrix `K(rows, rows)`, filled from the lower triangle.
pub fn kernel_matrix_symmetric(spec: &KernelSpec, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.check_width(rows.ncols())?;
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::input("kernel matrix input must be nonempty"));
    }
    let amp2 = spec.prior_variance();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = amp2;
        let xi: Vec<f64> = rows.row(i).iter().copied().collect();
        for j in 0..i {
            let xj: Vec<f64> = rows.row(j).iter().copied().collect();
            let v = amp2 * spec.family.correlation(spec.scaled_distance(&xi, &xj));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

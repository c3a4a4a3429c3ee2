//! Dense Gaussian-process regression.
//!
//! This is the reference model: exact but cubic in the number of
//! observations, so the optimizer only uses it below the exact/sparse
//! switch threshold. The sparse approximations are tested against it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, kernel_matrix_symmetric, KernelSpec};
use crate::linalg::{cholesky_with_jitter, log_det};

const LOG_2PI: f64 = 1.8378770664093453;

/// Fitted dense GP with cached factorization.
///
/// Immutable after fitting; prediction is safe from any number of threads.
#[derive(Debug, Clone)]
pub struct ExactGpModel {
    spec: KernelSpec,
    noise: f64,
    mean: f64,
    train_inputs: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `(K + noise I)^-1 (y - mean)`
    weights: DVector<f64>,
    residual: DVector<f64>,
}

/// Fit a dense GP to `data` with fixed hyperparameters.
pub fn fit_exact(data: &Dataset, spec: &KernelSpec, noise: f64, mean: f64) -> Result<ExactGpModel> {
    if data.is_empty() {
        return Err(Error::input("cannot fit a GP to an empty dataset"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::input("noise variance must be finite and nonnegative"));
    }
    let inputs = data.inputs_matrix();
    let mut cov = kernel_matrix_symmetric(spec, &inputs)?;
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&cov, spec.jitter(), 1e-6 * spec.prior_variance())?;
    let residual = data.outputs_vector().map(|y| y - mean);
    let weights = chol.solve(&residual);
    Ok(ExactGpModel {
        spec: spec.clone(),
        noise,
        mean,
        train_inputs: inputs,
        chol,
        weights,
        residual,
    })
}

impl ExactGpModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posterior mean and variance at the query rows.
    ///
    /// The variance is the latent-function variance
    /// `k(x,x) - k*^T (K + noise I)^-1 k*`, clamped at zero from below.
    pub fn predict(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if queries.ncols() != self.train_inputs.ncols() {
            return Err(Error::input(format!(
                "query width {} does not match training width {}",
                queries.ncols(),
                self.train_inputs.ncols()
            )));
        }
        let cross = kernel_matrix(&self.spec, &self.train_inputs, queries)?;
        let mean = DVector::from_fn(queries.nrows(), |j, _| {
            self.mean + cross.column(j).dot(&self.weights)
        });
        // var_j = k(x,x) - || L^-1 k*_j ||^2
        let mut solved = cross.clone();
        self.chol.solve_mut(&mut solved);
        let prior = self.spec.prior_variance();
        let var = DVector::from_fn(queries.nrows(), |j, _| {
            (prior - cross.column(j).dot(&solved.column(j))).max(0.0)
        });
        Ok((mean, var))
    }

    /// Log marginal likelihood of the training data under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        -0.5 * n * LOG_2PI - 0.5 * log_det(&self.chol) - 0.5 * self.residual.dot(&self.weights)
    }
}

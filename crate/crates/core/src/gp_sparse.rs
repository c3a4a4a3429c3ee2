//! Low-rank sparse GP approximations with inducing points.
//!
//! Three variants share one factorization. With `Q_ab = K_au Kuu^-1 K_ub`,
//! the training covariance is approximated by `Q_ff + L` where `L` is
//! diagonal:
//!
//! * `SoR`/`DTC`: `L = noise * I`
//! * `FIC`:       `L = Diag[K_ff - Q_ff] + noise * I`
//!
//! Everything routes through `Sigma = [Kuu + Kuf L^-1 Kfu]^-1`, realized as
//! Cholesky solves in the whitened form `Kuu^-1/2 ... Kuu^-T/2` so that no
//! explicit inverse is ever formed. Fitting streams over the data in column
//! blocks, so cost is O(n m^2) time and O(m^2 + n) memory.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::dataset::Dataset;
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, kernel_matrix_symmetric, KernelSpec};
use crate::linalg::{cholesky_with_jitter, log_det};

const LOG_2PI: f64 = 1.8378770664093453;
const LAMBDA_FLOOR: f64 = 1e-12;
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SparseVariant {
    SoR,
    Dtc,
    Fic,
}

impl SparseVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sor" => Ok(SparseVariant::SoR),
            "dtc" => Ok(SparseVariant::Dtc),
            "fic" => Ok(SparseVariant::Fic),
            other => Err(Error::config(format!("unknown sparse variant '{other}'"))),
        }
    }
}

/// Inducing inputs in the embedded space, rows are points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducingSet {
    points: DMatrix<f64>,
}

impl InducingSet {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::input("inducing set must be nonempty"));
        }
        Ok(InducingSet { points })
    }

    /// Use the training inputs themselves as inducing points.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        InducingSet::new(data.inputs_matrix())
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }
}

/// Latin hypercube sample of `min(n_data, m)` inducing points over the box.
pub fn sample_inducing(
    bounds: &BoxBounds,
    m: usize,
    n_data: usize,
    rng: &mut ChaCha8Rng,
) -> Result<InducingSet> {
    if m == 0 {
        return Err(Error::input("at least one inducing point is required"));
    }
    let m_eff = m.min(n_data.max(1));
    InducingSet::new(latin_hypercube(bounds, m_eff, rng)?)
}

/// `Q_ab = K_au Kuu^-1 K_ub`, with the inverse realized as a Cholesky solve.
pub fn q_matrix(
    spec: &KernelSpec,
    rows_a: &DMatrix<f64>,
    inducing: &InducingSet,
    rows_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let kau = kernel_matrix(spec, rows_a, inducing.points())?;
    let kub = kernel_matrix(spec, inducing.points(), rows_b)?;
    let kuu = kernel_matrix_symmetric(spec, inducing.points())?;
    let (chol, _) = cholesky_with_jitter(&kuu, spec.jitter(), 1e-6 * spec.prior_variance())?;
    Ok(&kau * chol.solve(&kub))
}

/// Fitted sparse GP with cached factorizations.
#[derive(Debug, Clone)]
pub struct SparseGpModel {
    spec: KernelSpec,
    noise: f64,
    mean: f64,
    variant: SparseVariant,
    inducing: InducingSet,
    #[allow(dead_code)]
    train_inputs: DMatrix<f64>,
    /// Factor of `Kuu + jitter I`.
    kuu_chol: Cholesky<f64, Dyn>,
    /// Factor of `A = I + V L^-1 V^T` where `V = Lkuu^-1 Kuf`.
    inner_chol: Cholesky<f64, Dyn>,
    /// `Sigma Kuf L^-1 (y - mean)`; posterior mean weight on `K_*u`.
    weights: DVector<f64>,
    lambda: DVector<f64>,
    // Accumulators for the marginal likelihood and the evidence bound.
    logdet_lambda: f64,
    quad_diag: f64,
    quad_correction: f64,
    trace_kff_qff: f64,
    gram_uu: DMatrix<f64>,
    kuf_residual: DVector<f64>,
    residual_norm2: f64,
}

/// Fit a sparse GP with fixed hyperparameters and fixed inducing inputs.
pub fn fit_sparse(
    data: &Dataset,
    spec: &KernelSpec,
    noise: f64,
    mean: f64,
    inducing: &InducingSet,
    variant: SparseVariant,
) -> Result<SparseGpModel> {
    if data.is_empty() {
        return Err(Error::input("cannot fit a GP to an empty dataset"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::input("noise variance must be finite and nonnegative"));
    }
    if inducing.points().ncols() != data.dim() {
        return Err(Error::input(format!(
            "inducing width {} does not match data width {}",
            inducing.points().ncols(),
            data.dim()
        )));
    }
    let n = data.len();
    let m = inducing.len();
    let prior = spec.prior_variance();

    let kuu = kernel_matrix_symmetric(spec, inducing.points())?;
    let (kuu_chol, _) = cholesky_with_jitter(&kuu, spec.jitter(), 1e-6 * prior)?;
    let lk = kuu_chol.l();

    let inputs = data.inputs_matrix();
    let outputs = data.outputs_vector();

    let mut inner = DMatrix::<f64>::identity(m, m);
    let mut gram_uu = DMatrix::<f64>::zeros(m, m);
    let mut c = DVector::<f64>::zeros(m);
    let mut kuf_residual = DVector::<f64>::zeros(m);
    let mut lambda = DVector::<f64>::zeros(n);
    let mut logdet_lambda = 0.0;
    let mut quad_diag = 0.0;
    let mut trace_kff_qff = 0.0;
    let mut residual_norm2 = 0.0;

    let mut start = 0;
    while start < n {
        let b = BLOCK.min(n - start);
        let block_inputs = inputs.rows(start, b).into_owned();
        let kub = kernel_matrix(spec, inducing.points(), &block_inputs)?;
        let v = lk
            .solve_lower_triangular(&kub)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let mut scaled = v.clone();
        for j in 0..b {
            let r = outputs[start + j] - mean;
            residual_norm2 += r * r;
            let qff = v.column(j).norm_squared();
            let gap = (prior - qff).max(0.0);
            trace_kff_qff += gap;
            let lam = match variant {
                SparseVariant::SoR | SparseVariant::Dtc => noise.max(LAMBDA_FLOOR),
                SparseVariant::Fic => (gap + noise).max(LAMBDA_FLOOR),
            };
            lambda[start + j] = lam;
            logdet_lambda += lam.ln();
            quad_diag += r * r / lam;
            let inv_sqrt = 1.0 / lam.sqrt();
            scaled.column_mut(j).scale_mut(inv_sqrt);
            c.axpy(r / lam, &kub.column(j).into_owned(), 1.0);
            kuf_residual.axpy(r, &kub.column(j).into_owned(), 1.0);
        }
        inner.gemm(1.0, &scaled, &scaled.transpose(), 1.0);
        gram_uu.gemm(1.0, &kub, &kub.transpose(), 1.0);
        start += b;
    }

    // A >= I by construction; jitter is only for gemm accumulation error.
    let (inner_chol, _) = cholesky_with_jitter(&inner, 0.0, 1e-6)?;

    // weights = B^-1 c with B = Lk A Lk^T.
    let t1 = lk
        .solve_lower_triangular(&c)
        .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
    let t2 = inner_chol.solve(&t1);
    let weights = lk
        .transpose()
        .solve_upper_triangular(&t2)
        .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
    let quad_correction = inner_chol
        .l()
        .solve_lower_triangular(&t1)
        .ok_or_else(|| Error::numerical("singular whitened factor"))?
        .norm_squared();

    Ok(SparseGpModel {
        spec: spec.clone(),
        noise,
        mean,
        variant,
        inducing: inducing.clone(),
        train_inputs: inputs,
        kuu_chol,
        inner_chol,
        weights,
        lambda,
        logdet_lambda,
        quad_diag,
        quad_correction,
        trace_kff_qff,
        gram_uu,
        kuf_residual,
        residual_norm2,
    })
}

impl SparseGpModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variant(&self) -> SparseVariant {
        self.variant
    }

    pub fn inducing(&self) -> &InducingSet {
        &self.inducing
    }

    pub fn num_inducing(&self) -> usize {
        self.inducing.len()
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Posterior mean and variance at the query rows.
    ///
    /// Mean is `mean + K_*u Sigma Kuf L^-1 (y - mean)` for every variant.
    /// Variance is `diag[K_*u Sigma K_u*]` for SoR and additionally carries
    /// the `K_** - Q_**` correction for DTC and FIC. Cost per query is O(m)
    /// for the mean and O(m^2) for the variance.
    pub fn predict(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if queries.ncols() != self.inducing.points().ncols() {
            return Err(Error::input(format!(
                "query width {} does not match model width {}",
                queries.ncols(),
                self.inducing.points().ncols()
            )));
        }
        let q = queries.nrows();
        let ksu = kernel_matrix(&self.spec, queries, self.inducing.points())?;
        let mean = DVector::from_fn(q, |i, _| self.mean + ksu.row(i).transpose().dot(&self.weights));

        let kus = ksu.transpose();
        let t = self
            .kuu_chol
            .l()
            .solve_lower_triangular(&kus)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let s = self
            .inner_chol
            .l()
            .solve_lower_triangular(&t)
            .ok_or_else(|| Error::numerical("singular whitened factor"))?;
        let prior = self.spec.prior_variance();
        let var = DVector::from_fn(q, |i, _| {
            let sor = s.column(i).norm_squared();
            let v = match self.variant {
                SparseVariant::SoR => sor,
                SparseVariant::Dtc | SparseVariant::Fic => {
                    prior - t.column(i).norm_squared() + sor
                }
            };
            v.max(0.0)
        });
        Ok((mean, var))
    }

    /// Log marginal likelihood of `y` under the `Q_ff + L` approximation,
    /// expanded through the Woodbury identity and the matrix determinant
    /// lemma; O(n m^2) at fit time, O(1) here.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let logdet = self.logdet_lambda + log_det(&self.inner_chol);
        let quad = self.quad_diag - self.quad_correction;
        -0.5 * n * LOG_2PI - 0.5 * logdet - 0.5 * quad
    }

    /// Variational evidence lower bound on the exact log marginal likelihood:
    /// the DTC-form likelihood minus `Tr[K_ff - Q_ff] / (2 noise)`.
    pub fn elbo(&self) -> Result<f64> {
        if self.noise <= 0.0 {
            return Err(Error::input(
                "the evidence bound requires a strictly positive noise variance",
            ));
        }
        let n = self.len() as f64;
        let m = self.num_inducing();
        let lk = self.kuu_chol.l();

        // A~ = I + Lk^-1 (G / noise) Lk^-T with G = Kuf Kfu.
        let t = lk
            .solve_lower_triangular(&self.gram_uu)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let h = lk
            .solve_lower_triangular(&t.transpose())
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?
            .transpose();
        let mut inner = DMatrix::<f64>::identity(m, m);
        inner += h / self.noise;
        let (inner_chol, _) = cholesky_with_jitter(&inner, 0.0, 1e-6)?;

        let t1 = lk
            .solve_lower_triangular(&self.kuf_residual)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let corr = inner_chol
            .l()
            .solve_lower_triangular(&t1)
            .ok_or_else(|| Error::numerical("singular whitened factor"))?
            .norm_squared();
        let quad = self.residual_norm2 / self.noise - corr / (self.noise * self.noise);
        let logdet = n * self.noise.ln() + log_det(&inner_chol);
        let fit_term = -0.5 * n * LOG_2PI - 0.5 * logdet - 0.5 * quad;
        Ok(fit_term - self.trace_kff_qff / (2.0 * self.noise))
    }

    /// Apply `[Q_ff + L]^-1` to a vector through the Woodbury expansion.
    /// Rebuilds cross-covariances, so this is for verification, not hot paths.
    #[allow(dead_code)]
    pub(crate) fn solve_qff_plus_lambda(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let kuf = kernel_matrix(&self.spec, self.inducing.points(), &self.train_inputs)?;
        let lam_inv_rhs = DVector::from_fn(rhs.len(), |i, _| rhs[i] / self.lambda[i]);
        let c = &kuf * &lam_inv_rhs;
        let t1 = self
            .kuu_chol
            .l()
            .solve_lower_triangular(&c)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let t2 = self.inner_chol.solve(&t1);
        let back = self
            .kuu_chol
            .l()
            .transpose()
            .solve_upper_triangular(&t2)
            .ok_or_else(|| Error::numerical("singular inducing covariance factor"))?;
        let pulled = kuf.transpose() * back;
        Ok(DVector::from_fn(rhs.len(), |i, _| {
            lam_inv_rhs[i] - pulled[i] / self.lambda[i]
        }))
    }
}

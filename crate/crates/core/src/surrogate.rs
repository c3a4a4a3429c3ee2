//! Model selection and a common posterior interface.
//!
//! Small datasets get the dense GP, larger ones the sparse approximation
//! with freshly sampled inducing inputs per refit. The switch changes no
//! contract: with inducing equal to the training inputs the sparse model
//! reproduces the dense one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::BoxBounds;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::gp_exact::{fit_exact, ExactGpModel};
use crate::gp_sparse::{fit_sparse, sample_inducing, SparseGpModel, SparseVariant};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng::rng_for;
use crate::train::{train_hypers_exact, train_sparse, HyperBounds, TrainObjective};

/// Read-only posterior access shared by the dense and sparse models.
pub trait Surrogate {
    /// Posterior mean and variance at the query rows.
    fn posterior(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)>;

    fn posterior_one(&self, z: &[f64]) -> Result<(f64, f64)> {
        let q = DMatrix::from_fn(1, z.len(), |_, j| z[j]);
        let (mean, var) = self.posterior(&q)?;
        Ok((mean[0], var[0]))
    }
}

impl Surrogate for ExactGpModel {
    fn posterior(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.predict(queries)
    }
}

impl Surrogate for SparseGpModel {
    fn posterior(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.predict(queries)
    }
}

/// Whichever model the exact/sparse switch selected.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Exact(ExactGpModel),
    Sparse(SparseGpModel),
}

impl FittedModel {
    /// Inducing points actually carried by the model; the dense model
    /// implicitly uses every training point.
    pub fn num_inducing(&self) -> usize {
        match self {
            FittedModel::Exact(m) => m.len(),
            FittedModel::Sparse(m) => m.num_inducing(),
        }
    }
}

impl Surrogate for FittedModel {
    fn posterior(&self, queries: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        match self {
            FittedModel::Exact(m) => m.predict(queries),
            FittedModel::Sparse(m) => m.predict(queries),
        }
    }
}

/// Everything the refit path needs to know about the model family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSettings {
    pub family: KernelFamily,
    pub init_amplitude: f64,
    pub init_lengthscale: f64,
    /// Use the dense GP strictly below this many observations.
    pub exact_below_n: usize,
    pub variant: SparseVariant,
    pub num_inducing: usize,
    pub objective: String,
    /// Retrain hyperparameters every this many completions; 0 disables
    /// retraining after the initial fit.
    pub hyper_interval: usize,
    pub train_restarts: usize,
    /// Resample inducing inputs at every refit; otherwise keep the draw
    /// from the first sparse refit.
    pub resample_inducing: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            family: KernelFamily::Matern32,
            init_amplitude: 1.0,
            init_lengthscale: 1.0,
            exact_below_n: 256,
            variant: SparseVariant::Fic,
            num_inducing: 300,
            objective: "elbo".to_string(),
            hyper_interval: 5,
            train_restarts: 3,
            resample_inducing: true,
        }
    }
}

impl ModelSettings {
    pub fn train_objective(&self) -> Result<TrainObjective> {
        TrainObjective::parse(&self.objective)
    }
}

/// Current hyperparameters, evolved by periodic retraining.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperState {
    pub spec: KernelSpec,
    pub noise: f64,
    pub mean: f64,
}

impl HyperState {
    pub fn initial(settings: &ModelSettings) -> Result<Self> {
        Ok(HyperState {
            spec: KernelSpec::isotropic(
                settings.family,
                settings.init_amplitude,
                settings.init_lengthscale,
            )?,
            noise: 1e-6,
            mean: 0.0,
        })
    }
}

fn mean_width(bounds: &BoxBounds) -> f64 {
    (0..bounds.dim()).map(|j| bounds.width(j)).sum::<f64>() / bounds.dim() as f64
}

/// Refit the surrogate at the current hyperparameters.
///
/// `refit_index` feeds the inducing-point draw so that refits are
/// reproducible and, when resampling is enabled, distinct.
pub fn fit_surrogate(
    data: &Dataset,
    bounds: &BoxBounds,
    settings: &ModelSettings,
    hypers: &HyperState,
    refit_index: u64,
    seed: u64,
) -> Result<FittedModel> {
    if data.len() < settings.exact_below_n {
        let model = fit_exact(data, &hypers.spec, hypers.noise, hypers.mean)?;
        Ok(FittedModel::Exact(model))
    } else {
        let draw = if settings.resample_inducing { refit_index } else { 0 };
        let mut rng = rng_for(seed, "inducing", draw);
        let inducing = sample_inducing(bounds, settings.num_inducing, data.len(), &mut rng)?;
        let model = fit_sparse(
            data,
            &hypers.spec,
            hypers.noise,
            hypers.mean,
            &inducing,
            settings.variant,
        )?;
        Ok(FittedModel::Sparse(model))
    }
}

/// Retrain hyperparameters on the current data.
///
/// The constant mean is pinned to the sample mean and the noise floor to
/// the bounds derived from the output variance.
pub fn retrain_hypers(
    data: &Dataset,
    bounds: &BoxBounds,
    settings: &ModelSettings,
    current: &HyperState,
    completed: u64,
    seed: u64,
) -> Result<HyperState> {
    let hyper_bounds = HyperBounds::from_data(data, mean_width(bounds));
    let mean = data.output_mean();
    let train_seed = crate::rng::derive_seed(seed, "train", completed);
    if data.len() < settings.exact_below_n {
        let trained = train_hypers_exact(
            data,
            &current.spec,
            current.noise,
            mean,
            &hyper_bounds,
            settings.train_restarts,
            train_seed,
        )?;
        Ok(HyperState {
            spec: trained.spec,
            noise: trained.noise,
            mean,
        })
    } else {
        let mut rng = rng_for(seed, "inducing-train", completed);
        let inducing = sample_inducing(bounds, settings.num_inducing, data.len(), &mut rng)?;
        let model = train_sparse(
            data,
            &current.spec,
            current.noise,
            mean,
            &inducing,
            settings.variant,
            settings.train_objective()?,
            &hyper_bounds,
            settings.train_restarts,
            train_seed,
        )?;
        Ok(HyperState {
            spec: model.spec().clone(),
            noise: model.noise(),
            mean,
        })
    }
}

//! Hyperparameter training by multi-start local search in log space.
//!
//! The search variables are `[ln amplitude, ln lengthscale.., ln noise]`.
//! Every start is refined by pattern search; the best objective over all
//! starts wins, and the initial point is always one of the starts, so the
//! returned objective never falls below the initial one. The constant mean
//! is not searched; callers pass it in (the sample mean by default).

use nalgebra::{DMatrix, DVector};

use crate::bounds::BoxBounds;
use crate::dataset::Dataset;
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp_exact::fit_exact;
use crate::gp_sparse::{fit_sparse, InducingSet, SparseGpModel, SparseVariant};
use crate::kernels::KernelSpec;
use crate::optim::{pattern_search_min, PatternSearchOptions};
use crate::rng::rng_for;

/// Positive search intervals for the hyperparameters, in linear space.
#[derive(Debug, Clone)]
pub struct HyperBounds {
    pub amplitude: (f64, f64),
    pub lengthscale: (f64, f64),
    pub noise: (f64, f64),
}

impl HyperBounds {
    /// Data-driven defaults: amplitude within `[1e-2, 1e2] * std(y)`,
    /// lengthscale within `[1e-3, 1e1] * domain width`, noise within
    /// `[1e-8, 1] * var(y)`.
    pub fn from_data(data: &Dataset, domain_width: f64) -> Self {
        let var = data.output_variance().max(1e-12);
        let std = var.sqrt();
        HyperBounds {
            amplitude: (1e-2 * std, 1e2 * std),
            lengthscale: (1e-3 * domain_width, 1e1 * domain_width),
            noise: (1e-8 * var, var.max(1e-8 * var * 10.0)),
        }
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.amplitude, self.lengthscale, self.noise] {
            if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
                return Err(Error::input("hyperparameter bounds must be positive intervals"));
            }
        }
        Ok(())
    }

    fn log_box(&self, num_lengthscales: usize) -> BoxBounds {
        let mut lower = vec![self.amplitude.0.ln()];
        let mut upper = vec![self.amplitude.1.ln()];
        for _ in 0..num_lengthscales {
            lower.push(self.lengthscale.0.ln());
            upper.push(self.lengthscale.1.ln());
        }
        lower.push(self.noise.0.ln());
        upper.push(self.noise.1.ln());
        BoxBounds { lower, upper }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainObjective {
    LogMarginal,
    Elbo,
}

impl TrainObjective {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lml" => Ok(TrainObjective::LogMarginal),
            "elbo" => Ok(TrainObjective::Elbo),
            other => Err(Error::config(format!("unknown training objective '{other}'"))),
        }
    }
}

/// Trained hyperparameters together with the objective they achieved.
#[derive(Debug, Clone)]
pub struct TrainedHypers {
    pub spec: KernelSpec,
    pub noise: f64,
    pub mean: f64,
    pub objective: f64,
}

fn pack(spec: &KernelSpec, noise: f64) -> Vec<f64> {
    let mut theta = vec![spec.amplitude().ln()];
    theta.extend(spec.lengthscales().iter().map(|l| l.ln()));
    theta.push(noise.ln());
    theta
}

fn unpack(
    theta: &[f64],
    family: crate::kernels::KernelFamily,
    bounds: &HyperBounds,
) -> Result<(KernelSpec, f64)> {
    // Clamp in linear space: exp(ln x) can fall one ulp outside the interval.
    let amp = theta[0]
        .exp()
        .clamp(bounds.amplitude.0, bounds.amplitude.1);
    let ls: Vec<f64> = theta[1..theta.len() - 1]
        .iter()
        .map(|t| t.exp().clamp(bounds.lengthscale.0, bounds.lengthscale.1))
        .collect();
    let noise = theta[theta.len() - 1]
        .exp()
        .clamp(bounds.noise.0, bounds.noise.1);
    Ok((KernelSpec::new(family, amp, ls)?, noise))
}

fn multi_start<F>(
    init_theta: Vec<f64>,
    log_box: &BoxBounds,
    restarts: usize,
    seed: u64,
    mut objective: F,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    if restarts == 0 {
        return Err(Error::input("at least one restart is required"));
    }
    let mut starts = vec![{
        let mut t = init_theta;
        log_box.clamp(&mut t);
        t
    }];
    if restarts > 1 {
        let mut rng = rng_for(seed, "hyper-starts", 0);
        let extra = latin_hypercube(log_box, restarts - 1, &mut rng)?;
        for i in 0..extra.nrows() {
            starts.push(extra.row(i).iter().copied().collect());
        }
    }

    let opts = PatternSearchOptions {
        max_sweeps: 60,
        tol_frac: 1e-3,
        init_step_frac: 0.2,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let mut batched = |batch: &DMatrix<f64>| {
            DVector::from_fn(batch.nrows(), |i, _| {
                let theta: Vec<f64> = batch.row(i).iter().copied().collect();
                let v = objective(&theta);
                if v.is_finite() {
                    -v
                } else {
                    f64::INFINITY
                }
            })
        };
        let (theta, neg) = pattern_search_min(&mut batched, log_box, &start, &opts);
        if neg.is_finite() {
            let val = -neg;
            if best.as_ref().is_none_or(|(_, b)| val > *b) {
                best = Some((theta, val));
            }
        }
    }
    best.ok_or_else(|| Error::numerical("every training restart failed to produce a finite objective"))
}

/// Maximize the exact log marginal likelihood over the hyperparameters.
pub fn train_hypers_exact(
    data: &Dataset,
    init: &KernelSpec,
    init_noise: f64,
    mean: f64,
    bounds: &HyperBounds,
    restarts: usize,
    seed: u64,
) -> Result<TrainedHypers> {
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    bounds.validate()?;
    let family = init.family();
    let log_box = bounds.log_box(init.lengthscales().len());
    let init_theta = pack(init, init_noise.max(bounds.noise.0));
    let (theta, objective) = multi_start(init_theta, &log_box, restarts, seed, |theta| {
        match unpack(theta, family, bounds)
            .and_then(|(spec, noise)| fit_exact(data, &spec, noise, mean))
        {
            Ok(model) => model.log_marginal_likelihood(),
            Err(_) => f64::NEG_INFINITY,
        }
    })?;
    let (spec, noise) = unpack(&theta, family, bounds)?;
    Ok(TrainedHypers {
        spec,
        noise,
        mean,
        objective,
    })
}

/// Maximize the sparse likelihood or the evidence bound with the inducing
/// inputs held fixed, returning the model refit at the winning
/// hyperparameters.
#[allow(clippy::too_many_arguments)]
pub fn train_sparse(
    data: &Dataset,
    init: &KernelSpec,
    init_noise: f64,
    mean: f64,
    inducing: &InducingSet,
    variant: SparseVariant,
    objective: TrainObjective,
    bounds: &HyperBounds,
    restarts: usize,
    seed: u64,
) -> Result<SparseGpModel> {
    if data.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    bounds.validate()?;
    let family = init.family();
    let log_box = bounds.log_box(init.lengthscales().len());
    let init_theta = pack(init, init_noise.max(bounds.noise.0));
    let evaluate = |theta: &[f64]| {
        let fitted = unpack(theta, family, bounds)
            .and_then(|(spec, noise)| fit_sparse(data, &spec, noise, mean, inducing, variant));
        match fitted {
            Ok(model) => match objective {
                TrainObjective::LogMarginal => model.log_marginal_likelihood(),
                TrainObjective::Elbo => model.elbo().unwrap_or(f64::NEG_INFINITY),
            },
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (theta, _) = multi_start(init_theta, &log_box, restarts, seed, evaluate)?;
    let (spec, noise) = unpack(&theta, family, bounds)?;
    fit_sparse(data, &spec, noise, mean, inducing, variant)
}

//! Sparse-GP stress sweep: fit and prediction cost versus data size and
//! inducing-point count.
//!
//! Training points, inducing points, and a fixed held-out test set come
//! from Latin hypercube designs over the 3-D sphere domain. Hyperparameters
//! are trained once per `(seed, n)` on a dense subsample, then shared
//! across the inducing-point counts so the sweep isolates the
//! approximation, not the trainer.

use std::time::Instant;

use crate::bounds::BoxBounds;
use crate::dataset::{Dataset, OptMode};
use crate::design::latin_hypercube_seeded;
use crate::error::Result;
use crate::gp_sparse::{fit_sparse, sample_inducing, SparseVariant};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::rng::rng_for;
use crate::train::{train_hypers_exact, HyperBounds};
use crate::benchmarks::{BenchmarkName, BenchmarkSpec};

/// One cell of the stress sweep.
#[derive(Debug, Clone)]
pub struct StressRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub fit_ms: f64,
    pub predict_ms: f64,
    pub rmse: f64,
}

/// Subsample size for the dense hyperparameter fit.
const TRAIN_SUBSAMPLE: usize = 256;

/// Run the sweep over every `(n, m)` pair for each seed.
pub fn stress_gp(
    n_list: &[usize],
    m_list: &[usize],
    seeds: &[u64],
    heldout: usize,
) -> Result<Vec<StressRow>> {
    let bench = BenchmarkSpec::new(BenchmarkName::Sphere, 3)?;
    let bounds: BoxBounds = bench.bounds().clone();
    let mut rows = Vec::new();

    for &seed in seeds {
        let test_inputs = latin_hypercube_seeded(&bounds, heldout, seed, "stress-test", 0)?;
        let test_values: Vec<f64> = (0..heldout)
            .map(|i| {
                let x: Vec<f64> = test_inputs.row(i).iter().copied().collect();
                bench.value(&x)
            })
            .collect::<Result<_>>()?;

        for &n in n_list {
            let train_inputs = latin_hypercube_seeded(&bounds, n, seed, "stress-train", n as u64)?;
            let mut data = Dataset::new(3, OptMode::Minimize);
            for i in 0..n {
                let x: Vec<f64> = train_inputs.row(i).iter().copied().collect();
                let y = bench.value(&x)?;
                data.append(x, y)?;
            }

            // Dense hyperparameter fit on a subsample; the sparse fits
            // below reuse these hyperparameters for every m.
            let sub = TRAIN_SUBSAMPLE.min(n);
            let mut sub_data = Dataset::new(3, OptMode::Minimize);
            for i in 0..sub {
                sub_data.append(data.input(i).to_vec(), data.output(i))?;
            }
            let init = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0)?;
            let hyper_bounds = HyperBounds::from_data(&sub_data, 2.0);
            let trained = train_hypers_exact(
                &sub_data,
                &init,
                1e-6,
                sub_data.output_mean(),
                &hyper_bounds,
                2,
                crate::rng::derive_seed(seed, "stress-hypers", n as u64),
            )?;
            let mean = data.output_mean();

            for &m in m_list {
                let mut rng = rng_for(seed, "stress-inducing", (n as u64) << 20 | m as u64);
                let inducing = sample_inducing(&bounds, m, n, &mut rng)?;

                // Best of three for the small cases where timer noise bites.
                let reps = if n <= 10_000 { 3 } else { 1 };
                let mut fit_ms = f64::INFINITY;
                let mut model = None;
                for _ in 0..reps {
                    let t = Instant::now();
                    let fitted = fit_sparse(
                        &data,
                        &trained.spec,
                        trained.noise,
                        mean,
                        &inducing,
                        SparseVariant::Fic,
                    )?;
                    fit_ms = fit_ms.min(t.elapsed().as_secs_f64() * 1e3);
                    model = Some(fitted);
                }
                let model = model.expect("at least one fit");

                let t = Instant::now();
                let (pred, _) = model.predict(&test_inputs)?;
                let predict_ms = t.elapsed().as_secs_f64() * 1e3;

                let mse: f64 = (0..heldout)
                    .map(|i| (pred[i] - test_values[i]).powi(2))
                    .sum::<f64>()
                    / heldout as f64;
                rows.push(StressRow {
                    seed,
                    n,
                    m,
                    fit_ms,
                    predict_ms,
                    rmse: mse.sqrt(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn stress_csv(rows: &[StressRow]) -> String {
    let mut out = String::from("seed,n,m,fit_ms,predict_ms,rmse\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.6e}\n",
            r.seed, r.n, r.m, r.fit_ms, r.predict_ms, r.rmse
        ));
    }
    out
}

//! Run configuration: a flat `key = value` text file.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys are
//! errors, so typos fail loudly at load time instead of silently running
//! with defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use crate::acquisition::{AcquisitionKind, AcquisitionSpec};
use crate::benchmarks::{BenchmarkName, BenchmarkSpec};
use crate::dataset::OptMode;
use crate::error::{Error, Result};
use crate::gp_sparse::SparseVariant;
use crate::kernels::KernelFamily;
use crate::rng::derive_seed;
use crate::scheduler::PoolSettings;
use crate::surrogate::ModelSettings;

const KNOWN_KEYS: &[&str] = &[
    "run.seed",
    "run.mode",
    "run.init_design",
    "run.out_dir",
    "run.checkpoint_interval",
    "kernel.family",
    "kernel.amplitude",
    "kernel.lengthscale",
    "gp.variant",
    "gp.num_inducing",
    "gp.objective",
    "gp.exact_below_n",
    "gp.hyper_interval",
    "gp.train_restarts",
    "gp.resample_inducing",
    "acq.kind",
    "acq.delta",
    "acq.budget",
    "embed.dim_low",
    "embed.seed",
    "bench.name",
    "bench.dim",
    "bench.delay_lb_s",
    "bench.delay_ub_s",
    "bench.normalize_g",
    "bench.eff_dim",
    "sched.workers",
    "sched.budget",
    "sched.wallclock_s",
];

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: OptMode,
    pub init_design: usize,
    pub out_dir: String,
    pub checkpoint_interval: usize,
    pub kernel_family: KernelFamily,
    pub kernel_amplitude: f64,
    pub kernel_lengthscale: f64,
    pub variant: SparseVariant,
    pub num_inducing: usize,
    pub objective: String,
    pub exact_below_n: usize,
    pub hyper_interval: usize,
    pub train_restarts: usize,
    pub resample_inducing: bool,
    pub acq_kind: AcquisitionKind,
    pub acq_delta: f64,
    pub acq_budget: usize,
    pub dim_low: usize,
    pub embed_seed: u64,
    pub bench_name: BenchmarkName,
    pub bench_dim: usize,
    pub delay: Option<(f64, f64)>,
    pub normalize_g: bool,
    pub bench_eff_dim: usize,
    pub workers: usize,
    pub budget: usize,
    pub wallclock_s: Option<f64>,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("invalid value '{v}' for {key}"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .get(key)
            .ok_or_else(|| Error::config(format!("missing required key {key}")))?;
        v.parse()
            .map_err(|_| Error::config(format!("invalid value '{v}' for {key}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let fields = Fields(parse_pairs(text)?);

        let bench_name = BenchmarkName::parse(
            fields
                .get("bench.name")
                .ok_or_else(|| Error::config("missing required key bench.name"))?,
        )?;
        let bench_dim = match bench_name {
            BenchmarkName::Hartmann4 => fields.parse("bench.dim", 4usize)?,
            _ => fields.required("bench.dim")?,
        };
        let dim_low = match fields.get("embed.dim_low") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("invalid value '{v}' for embed.dim_low")))?,
            // Without an embedding request, search the ambient space directly.
            None => bench_dim,
        };
        let seed = fields.parse("run.seed", 0u64)?;
        let delay = match (fields.get("bench.delay_lb_s"), fields.get("bench.delay_ub_s")) {
            (None, None) => None,
            (Some(lo), Some(hi)) => {
                let lo: f64 = lo
                    .parse()
                    .map_err(|_| Error::config("invalid bench.delay_lb_s"))?;
                let hi: f64 = hi
                    .parse()
                    .map_err(|_| Error::config("invalid bench.delay_ub_s"))?;
                Some((lo, hi))
            }
            _ => {
                return Err(Error::config(
                    "bench.delay_lb_s and bench.delay_ub_s must be set together",
                ))
            }
        };

        let config = RunConfig {
            seed,
            mode: OptMode::parse(fields.get("run.mode").unwrap_or("minimize"))?,
            init_design: fields.parse("run.init_design", (dim_low + 1).max(2))?,
            out_dir: fields.get("run.out_dir").unwrap_or("s3bo-out").to_string(),
            checkpoint_interval: fields.parse("run.checkpoint_interval", 10usize)?,
            kernel_family: KernelFamily::parse(fields.get("kernel.family").unwrap_or("matern32"))?,
            kernel_amplitude: fields.parse("kernel.amplitude", 1.0f64)?,
            kernel_lengthscale: fields.parse("kernel.lengthscale", 1.0f64)?,
            variant: SparseVariant::parse(fields.get("gp.variant").unwrap_or("fic"))?,
            num_inducing: fields.parse("gp.num_inducing", 300usize)?,
            objective: {
                let o = fields.get("gp.objective").unwrap_or("elbo").to_string();
                crate::train::TrainObjective::parse(&o)?;
                o
            },
            exact_below_n: fields.parse("gp.exact_below_n", 256usize)?,
            hyper_interval: fields.parse("gp.hyper_interval", 5usize)?,
            train_restarts: fields.parse("gp.train_restarts", 3usize)?,
            resample_inducing: fields.parse("gp.resample_inducing", true)?,
            acq_kind: AcquisitionKind::parse(fields.get("acq.kind").unwrap_or("ei"))?,
            acq_delta: fields.parse("acq.delta", 0.1f64)?,
            acq_budget: fields.parse("acq.budget", 20usize)?,
            dim_low,
            embed_seed: fields.parse("embed.seed", derive_seed(seed, "embed", 0))?,
            bench_name,
            bench_dim,
            delay,
            normalize_g: fields.parse("bench.normalize_g", false)?,
            bench_eff_dim: fields.parse("bench.eff_dim", 1usize)?,
            workers: fields.parse("sched.workers", 1usize)?,
            budget: fields.required("sched.budget")?,
            wallclock_s: match fields.get("sched.wallclock_s") {
                None => None,
                Some(v) => Some(
                    v.parse()
                        .map_err(|_| Error::config("invalid sched.wallclock_s"))?,
                ),
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.init_design == 0 {
            return Err(Error::config("run.init_design must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::config("sched.workers must be positive"));
        }
        if !(self.acq_delta > 0.0 && self.acq_delta < 1.0) {
            return Err(Error::config("acq.delta must lie in (0, 1)"));
        }
        if self.kernel_amplitude <= 0.0 || self.kernel_lengthscale <= 0.0 {
            return Err(Error::config("kernel hyperparameters must be positive"));
        }
        if self.dim_low > self.bench_dim {
            return Err(Error::config("embed.dim_low must not exceed bench.dim"));
        }
        if let Some((lo, hi)) = self.delay {
            if !(0.0 <= lo && lo <= hi) {
                return Err(Error::config("delay interval must satisfy 0 <= lb <= ub"));
            }
        }
        Ok(())
    }

    /// Canonical text used for checkpoint compatibility hashing. Execution
    /// envelope fields (budget, wall clock, output paths, checkpoint
    /// cadence) are excluded: they do not shape the trajectory, and
    /// resuming with a larger budget is the point of checkpoints.
    pub fn canonical_string(&self) -> String {
        format!(
            "seed={};mode={:?};init={};kernel={:?},{},{};variant={:?};m={};obj={};switch={};\
             hyper_int={};restarts={};resample={};acq={:?},{},{};d={};embed_seed={};\
             bench={:?},{},{:?},{},{};workers={}",
            self.seed,
            self.mode,
            self.init_design,
            self.kernel_family,
            self.kernel_amplitude,
            self.kernel_lengthscale,
            self.variant,
            self.num_inducing,
            self.objective,
            self.exact_below_n,
            self.hyper_interval,
            self.train_restarts,
            self.resample_inducing,
            self.acq_kind,
            self.acq_delta,
            self.acq_budget,
            self.dim_low,
            self.embed_seed,
            self.bench_name,
            self.bench_dim,
            self.delay,
            self.normalize_g,
            self.bench_eff_dim,
            self.workers,
        )
    }

    pub fn config_hash(&self) -> u64 {
        derive_seed(
            self.canonical_string()
                .bytes()
                .fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64)),
            "config",
            0,
        )
    }

    pub fn benchmark(&self) -> Result<BenchmarkSpec> {
        let mut spec = BenchmarkSpec::new(self.bench_name, self.bench_dim)?
            .with_normalized_g(self.normalize_g);
        if let Some((lo, hi)) = self.delay {
            spec = spec.with_delay(lo, hi)?;
        }
        if self.bench_name == BenchmarkName::SphereGeneral {
            let mut rng = crate::rng::rng_for(self.seed, "bench-weights", 0);
            let w = crate::embedding::gaussian_matrix(self.bench_eff_dim, self.bench_dim, &mut rng);
            let rows: Vec<Vec<f64>> = (0..self.bench_eff_dim)
                .map(|i| w.row(i).iter().copied().collect())
                .collect();
            spec = spec.with_weights(rows)?;
        }
        Ok(spec)
    }

    pub fn model_settings(&self) -> ModelSettings {
        ModelSettings {
            family: self.kernel_family,
            init_amplitude: self.kernel_amplitude,
            init_lengthscale: self.kernel_lengthscale,
            exact_below_n: self.exact_below_n,
            variant: self.variant,
            num_inducing: self.num_inducing,
            objective: self.objective.clone(),
            hyper_interval: self.hyper_interval,
            train_restarts: self.train_restarts,
            resample_inducing: self.resample_inducing,
        }
    }

    /// A strict reduction requests the random embedding; at full dimension
    /// the search runs in the problem box directly (the identity case).
    pub fn uses_embedding(&self) -> bool {
        self.dim_low < self.bench_dim
    }

    pub fn pool_settings(&self) -> Result<PoolSettings> {
        let z_bounds = if self.uses_embedding() {
            crate::bounds::BoxBounds::embedded(self.dim_low)
        } else {
            self.benchmark()?.bounds().clone()
        };
        Ok(PoolSettings {
            workers: self.workers,
            budget: self.budget,
            wallclock: self.wallclock_s.map(Duration::from_secs_f64),
            seed: self.seed,
            z_bounds,
            mode: self.mode,
            acquisition: AcquisitionSpec::new(self.acq_kind, self.acq_delta, self.mode)?,
            acq_budget: self.acq_budget,
            init_design: self.init_design,
            model: self.model_settings(),
        })
    }
}

//! Full optimization campaign: embedding, surrogate, scheduler, and
//! persistence wired together.
//!
//! A campaign draws the random embedding, seeds the search with a Latin
//! hypercube design in the embedded box, and then runs the asynchronous
//! pool: propose in `z`, map through the embedding onto the problem box,
//! evaluate, and fold completions back into the surrogate. The trace is
//! streamed to JSONL as completions arrive and a checkpoint is written on a
//! fixed cadence, so an interrupted run resumes exactly (single-worker runs
//! reproduce the uninterrupted trace bit for bit).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::embedding::{draw_embedding, Embedding};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scheduler::{drive_pool, AmbientMap, Evaluator, JobRecord, PoolCore};
use crate::surrogate::HyperState;

/// Checkpoint payload: everything needed to continue a run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub embed_seed: u64,
    pub hypers: HyperState,
    pub records: Vec<JobRecord>,
}

/// Where the campaign artifacts live inside the output directory.
pub struct CampaignPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub checkpoint: PathBuf,
}

impl CampaignPaths {
    pub fn new(out_dir: &Path) -> Self {
        CampaignPaths {
            trace: out_dir.join("trace.jsonl"),
            summary: out_dir.join("summary.txt"),
            checkpoint: out_dir.join("checkpoint.json"),
        }
    }
}

/// Final state of a finished campaign.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub best_y: f64,
    pub best_z: Vec<f64>,
    pub best_x: Vec<f64>,
    pub evaluations: usize,
    pub wall_s: f64,
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
}

fn load_checkpoint(path: &Path, expected_hash: u64) -> Result<Option<Checkpoint>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("corrupt checkpoint {}: {e}", path.display())))?;
    if ckpt.config_hash != expected_hash {
        return Err(Error::config(
            "checkpoint belongs to a different configuration; remove it or change run.out_dir",
        ));
    }
    Ok(Some(ckpt))
}

fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(ckpt).expect("checkpoint serializes"))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn record_line(record: &JobRecord) -> String {
    serde_json::to_string(record).expect("record serializes")
}

/// Run a configured campaign, writing artifacts under `out_dir`.
///
/// If a compatible checkpoint exists in `out_dir` the run resumes from it;
/// a checkpoint from a different configuration is refused.
pub fn run_campaign(config: &RunConfig, out_dir: &Path) -> Result<CampaignOutcome> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let paths = CampaignPaths::new(out_dir);

    let benchmark = Arc::new(config.benchmark()?);
    let embedding = if config.uses_embedding() {
        Some(Arc::new(draw_embedding(
            config.bench_dim,
            config.dim_low,
            benchmark.bounds(),
            config.embed_seed,
        )?))
    } else {
        None
    };

    let to_ambient: AmbientMap = match &embedding {
        Some(e) => {
            let e = e.clone();
            Arc::new(move |z: &[f64]| e.embed_to_x(z).expect("z has the embedded dimension"))
        }
        // Full-dimensional search: the identity recovery case.
        None => Arc::new(|z: &[f64]| z.to_vec()),
    };
    let eval_benchmark = benchmark.clone();
    let evaluator: Evaluator = Arc::new(move |x: &[f64], rng: &mut rand_chacha::ChaCha8Rng| {
        eval_benchmark.evaluate(x, rng).map_err(|e| e.to_string())
    });

    let settings = config.pool_settings()?;
    let mut core = PoolCore::new(settings, to_ambient)?;

    let config_hash = config.config_hash();
    let mut records: Vec<JobRecord> = Vec::new();
    if let Some(ckpt) = load_checkpoint(&paths.checkpoint, config_hash)? {
        core.restore(&ckpt.records, Some(ckpt.hypers))?;
        records = ckpt.records;
    }

    // Rewrite the trace up to the restore point, then append live records.
    {
        let mut f = fs::File::create(&paths.trace)?;
        for r in &records {
            writeln!(f, "{}", record_line(r))?;
        }
    }
    let mut trace_file = fs::OpenOptions::new().append(true).open(&paths.trace)?;

    let checkpoint_interval = config.checkpoint_interval.max(1) as u64;
    let mut live: Vec<JobRecord> = Vec::new();
    let drive_result = drive_pool(core, evaluator, |record, core| {
        let _ = writeln!(trace_file, "{}", record_line(record));
        live.push(record.clone());
        if core.completed() % checkpoint_interval == 0 {
            let mut all = records.clone();
            all.extend(live.iter().cloned());
            let ckpt = Checkpoint {
                config_hash,
                embed_seed: config.embed_seed,
                hypers: core.hypers().clone(),
                records: all,
            };
            let _ = write_checkpoint(&paths.checkpoint, &ckpt);
        }
    });
    trace_file.flush()?;
    records.extend(live);
    // On a numerical or objective abort the partial trace stays on disk.
    drive_result?;

    let best = records
        .iter()
        .filter(|r| r.y.is_some())
        .min_by(|a, b| {
            let (ya, yb) = (a.y.unwrap(), b.y.unwrap());
            match config.mode {
                crate::dataset::OptMode::Minimize => ya.total_cmp(&yb),
                crate::dataset::OptMode::Maximize => yb.total_cmp(&ya),
            }
        })
        .ok_or_else(|| Error::Objective("campaign collected no completed evaluations".into()))?;

    let best_x = match &embedding {
        Some(e) => e.embed_to_x(&best.z)?,
        None => best.z.clone(),
    };
    let outcome = CampaignOutcome {
        best_y: best.y.expect("filtered on presence"),
        best_z: best.z.clone(),
        best_x,
        evaluations: records.len(),
        wall_s: started.elapsed().as_secs_f64(),
        trace_path: paths.trace.clone(),
        summary_path: paths.summary.clone(),
    };
    write_summary(&paths.summary, &outcome)?;
    Ok(outcome)
}

fn write_summary(path: &Path, outcome: &CampaignOutcome) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "best_y = {:.12e}", outcome.best_y)?;
    writeln!(f, "evaluations = {}", outcome.evaluations)?;
    writeln!(f, "wall_s = {:.3}", outcome.wall_s)?;
    let z: Vec<String> = outcome.best_z.iter().map(|v| format!("{v:.12e}")).collect();
    writeln!(f, "best_z = {}", z.join(" "))?;
    let x: Vec<String> = outcome.best_x.iter().map(|v| format!("{v:.12e}")).collect();
    writeln!(f, "best_x = {}", x.join(" "))?;
    Ok(())
}

/// Reconstruct the embedding a campaign used, for diagnostics and tests.
/// `None` when the campaign searched the problem box directly.
pub fn campaign_embedding(config: &RunConfig) -> Result<Option<Embedding>> {
    if !config.uses_embedding() {
        return Ok(None);
    }
    let benchmark = config.benchmark()?;
    draw_embedding(
        config.bench_dim,
        config.dim_low,
        benchmark.bounds(),
        config.embed_seed,
    )
    .map(Some)
}

/// Evaluate the benchmark at a reported point with delays disabled.
pub fn reevaluate_noiseless(config: &RunConfig, x: &[f64]) -> Result<f64> {
    let benchmark = crate::benchmarks::BenchmarkSpec::new(config.bench_name, config.bench_dim)?
        .with_normalized_g(config.normalize_g);
    let benchmark = if config.bench_name == crate::benchmarks::BenchmarkName::SphereGeneral {
        let mut rng = rng_for(config.seed, "bench-weights", 0);
        let w = crate::embedding::gaussian_matrix(config.bench_eff_dim, config.bench_dim, &mut rng);
        let rows: Vec<Vec<f64>> = (0..config.bench_eff_dim)
            .map(|i| w.row(i).iter().copied().collect())
            .collect();
        benchmark.with_weights(rows)?
    } else {
        benchmark
    };
    benchmark.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn sphere_config(budget: usize, out: &str) -> RunConfig {
        RunConfig::parse(&format!(
            "bench.name = sphere\nbench.dim = 20\nembed.dim_low = 2\n\
             sched.budget = {budget}\nrun.seed = 3\nacq.budget = 6\n\
             gp.train_restarts = 2\nrun.out_dir = {out}\nrun.checkpoint_interval = 5\n"
        ))
        .unwrap()
    }

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("s3bo-campaign-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn budget_equal_to_init_design_is_pure_design() {
        let dir = tmp_dir("init-only");
        let mut config = sphere_config(3, "unused");
        config.init_design = 3;
        let outcome = run_campaign(&config, &dir).unwrap();
        assert_eq!(outcome.evaluations, 3);
        let text = fs::read_to_string(outcome.trace_path).unwrap();
        let records: Vec<JobRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records.len(), 3);
        assert!(records
            .iter()
            .all(|r| r.task == crate::scheduler::TaskKind::Explore));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn incumbent_reconstruction_is_exact() {
        let dir = tmp_dir("reeval");
        let config = sphere_config(8, "unused");
        let outcome = run_campaign(&config, &dir).unwrap();
        let again = reevaluate_noiseless(&config, &outcome.best_x).unwrap();
        assert!((again - outcome.best_y).abs() <= 1e-10, "{again} vs {}", outcome.best_y);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn resume_reproduces_uninterrupted_trace() {
        let dir_full = tmp_dir("full");
        let dir_resumed = tmp_dir("resumed");

        let full = sphere_config(10, "unused");
        run_campaign(&full, &dir_full).unwrap();

        // Kill the run at evaluation 5 by capping the budget, then resume
        // to the full budget from the checkpoint it left behind.
        let mut half = full.clone();
        half.budget = 5;
        run_campaign(&half, &dir_resumed).unwrap();
        let mut rest = full.clone();
        rest.budget = 10;
        run_campaign(&rest, &dir_resumed).unwrap();

        let canon = |p: &Path| {
            fs::read_to_string(p)
                .unwrap()
                .lines()
                .map(|l| {
                    let r: JobRecord = serde_json::from_str(l).unwrap();
                    serde_json::to_string(&r.canonicalized()).unwrap()
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(
            canon(&CampaignPaths::new(&dir_full).trace),
            canon(&CampaignPaths::new(&dir_resumed).trace)
        );
        let _ = fs::remove_dir_all(&dir_full);
        let _ = fs::remove_dir_all(&dir_resumed);
    }

    #[test]
    fn checkpoint_from_other_config_is_refused() {
        let dir = tmp_dir("mismatch");
        let config = sphere_config(6, "unused");
        run_campaign(&config, &dir).unwrap();
        let mut other = sphere_config(6, "unused");
        other.seed = 99;
        let err = run_campaign(&other, &dir).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn every_evaluated_x_respects_problem_bounds() {
        let dir = tmp_dir("bounds");
        let config = sphere_config(8, "unused");
        let outcome = run_campaign(&config, &dir).unwrap();
        let embedding = campaign_embedding(&config).unwrap().expect("reduced search");
        let text = fs::read_to_string(outcome.trace_path).unwrap();
        for line in text.lines() {
            let r: JobRecord = serde_json::from_str(line).unwrap();
            let x = embedding.embed_to_x(&r.z).unwrap();
            assert!(embedding.x_bounds().contains(&x));
        }
        let _ = fs::remove_dir_all(&dir);
    }
}

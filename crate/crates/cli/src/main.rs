//! Benchmark-campaign command line for the scalable Bayesian optimizer.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use s3bo_core::campaign::run_campaign;
use s3bo_core::config::RunConfig;
use s3bo_core::embedding::mc_embedding_stats;
use s3bo_core::error::Error;
use s3bo_core::report::{convergence_csv, read_trace, schedule_csv};
use s3bo_core::stress::{stress_csv, stress_gp};

#[derive(Parser)]
#[command(name = "s3bo", about = "Scalable Bayesian optimization campaigns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization campaign from a config file.
    Run(RunArgs),
    /// Sweep sparse-GP fit/predict cost over data and inducing sizes.
    StressGp(StressArgs),
    /// Monte-Carlo probability that an embedded coordinate needs no projection.
    EmbedProb(EmbedProbArgs),
    /// Summarize one or more trace files into CSV tables.
    Report(ReportArgs),
    /// Evaluate a benchmark at a point read from a text file.
    Eval(EvalArgs),
    /// Convert a trace into per-worker schedule bars.
    SchedulePlot(SchedulePlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the key=value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StressArgs {
    /// Comma-separated data sizes, e.g. 100,1000,10000.
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
    n_list: Vec<usize>,
    /// Comma-separated inducing-point counts.
    #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
    m_list: Vec<usize>,
    /// Number of seeds to sweep.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Held-out test points per seed.
    #[arg(long, default_value_t = 1000)]
    heldout: usize,
    /// Add the large extended cell (n = 10^6, m = 300) to the sweep.
    #[arg(long)]
    extended: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedProbArgs {
    /// Embedded dimension d.
    #[arg(long)]
    d: usize,
    /// Monte-Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the 1/d scaling of the embedded image.
    #[arg(long)]
    unscaled: bool,
    /// Also print the coordinate mean and variance.
    #[arg(long)]
    moments: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace files (JSONL), one per run of the same configuration.
    #[arg(long, num_args = 1.., required = true)]
    traces: Vec<PathBuf>,
    /// Output directory for the CSV tables.
    #[arg(long, default_value = "report-out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Benchmark name: zdt1|zdt2|zdt3|sphere|sphere-general|hartmann4.
    #[arg(long)]
    bench: String,
    /// Whitespace-separated coordinates in a text file.
    #[arg(long)]
    x: PathBuf,
    /// Use the (D-1)-normalized coupling for the ZDT variants.
    #[arg(long)]
    normalize_g: bool,
}

#[derive(Args)]
struct SchedulePlotArgs {
    /// Trace file (JSONL).
    #[arg(long)]
    trace: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Input(_) => 2,
        Error::Numerical(_) => 3,
        Error::Objective(_) => 4,
        _ => 1,
    }
}

fn write_or_print(out: Option<&PathBuf>, content: &str) -> s3bo_core::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> s3bo_core::Result<()> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.embed_seed = s3bo_core::rng::derive_seed(seed, "embed", 0);
    }
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.out_dir));
    let outcome = run_campaign(&config, &out_dir)?;
    println!(
        "best_y = {:.6e} after {} evaluations in {:.1}s",
        outcome.best_y, outcome.evaluations, outcome.wall_s
    );
    println!("trace:   {}", outcome.trace_path.display());
    println!("summary: {}", outcome.summary_path.display());
    Ok(())
}

fn cmd_stress(args: &StressArgs) -> s3bo_core::Result<()> {
    let mut n_list = args.n_list.clone();
    let mut m_list = args.m_list.clone();
    if args.extended {
        n_list.push(1_000_000);
        m_list.push(300);
    }
    n_list.sort_unstable();
    n_list.dedup();
    m_list.sort_unstable();
    m_list.dedup();
    let seeds: Vec<u64> = (0..args.seeds.max(1)).collect();
    let rows = stress_gp(&n_list, &m_list, &seeds, args.heldout)?;
    write_or_print(args.out.as_ref(), &stress_csv(&rows))
}

fn cmd_embed_prob(args: &EmbedProbArgs) -> s3bo_core::Result<()> {
    let stats = mc_embedding_stats(args.d, args.samples, args.seed, !args.unscaled)?;
    println!("{:.6}", stats.prob_in_unit);
    if args.moments {
        println!("mean = {:.6}", stats.mean);
        println!("variance = {:.6}", stats.variance);
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> s3bo_core::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let mut runs = Vec::new();
    let mut total_skipped = 0;
    for path in &args.traces {
        let (records, skipped) = read_trace(path)?;
        if skipped > 0 {
            eprintln!(
                "warning: skipped {skipped} malformed line(s) in {}",
                path.display()
            );
        }
        total_skipped += skipped;
        runs.push(records);
    }
    std::fs::write(args.out.join("convergence.csv"), convergence_csv(&runs))?;
    std::fs::write(args.out.join("schedule.csv"), schedule_csv(&runs[0]))?;
    println!(
        "wrote convergence.csv and schedule.csv under {} ({} runs, {} lines skipped)",
        args.out.display(),
        runs.len(),
        total_skipped
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> s3bo_core::Result<()> {
    let text = std::fs::read_to_string(&args.x)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", args.x.display())))?;
    let x: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Input(format!("'{tok}' is not a number")))
        })
        .collect::<s3bo_core::Result<_>>()?;
    if x.is_empty() {
        return Err(Error::Input("point file is empty".into()));
    }
    let name = s3bo_core::benchmarks::BenchmarkName::parse(&args.bench)?;
    let spec = s3bo_core::benchmarks::BenchmarkSpec::new(name, x.len())?
        .with_normalized_g(args.normalize_g);
    let y = spec.value(&x)?;
    println!("{y:.12e}");
    Ok(())
}

fn cmd_schedule_plot(args: &SchedulePlotArgs) -> s3bo_core::Result<()> {
    let (records, skipped) = read_trace(&args.trace)?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} malformed line(s)");
    }
    write_or_print(args.out.as_ref(), &schedule_csv(&records))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::StressGp(args) => cmd_stress(args),
        Command::EmbedProb(args) => cmd_embed_prob(args),
        Command::Report(args) => cmd_report(args),
        Command::Eval(args) => cmd_eval(args),
        Command::SchedulePlot(args) => cmd_schedule_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nomamimo::experiments::config::ConfigFile;
use nomamimo::experiments::svg::render_svg;
use nomamimo::experiments::{validate, ExperimentKind, ExperimentSpec};

/// NOMA vs zero-forcing massive MIMO experiments.
#[derive(Parser)]
#[command(name = "nomamimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-user rate region at a fixed antenna count.
    RateRegion(RunArgs),
    /// Maximum two-user sum rates and the antenna crossing point.
    #[command(name = "sumrate-vs-m-2user")]
    SumRateVsM2User(RunArgs),
    /// Placement-averaged sum rates versus the number of users.
    #[command(name = "sumrate-vs-k")]
    SumRateVsK(RunArgs),
    /// Placement-averaged sum rates versus the number of antennas.
    #[command(name = "sumrate-vs-m")]
    SumRateVsM(RunArgs),
    /// Run the quick invariant suite.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        pool: PoolArgs,
    },
}

#[derive(Args)]
struct PoolArgs {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo channel realizations per evaluation.
    #[arg(long)]
    trials: Option<usize>,
    /// Random placements for the averaged experiments.
    #[arg(long)]
    placements: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip the SVG plot.
    #[arg(long)]
    csv_only: bool,
    #[command(flatten)]
    pool: PoolArgs,
}

fn build_pool(pool: &PoolArgs) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = pool.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn spec_for(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => ConfigFile::load(path)
            .and_then(|c| c.experiment(kind))
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentSpec::default_for(kind),
    };
    if let Some(seed) = args.seed {
        spec.scenario = spec.scenario.with_seed(seed);
    }
    if let Some(trials) = args.trials {
        spec.scenario = spec.scenario.with_trials(trials)?;
    }
    if let Some(p) = args.placements {
        spec.placements = p;
    }
    if let Some(dir) = &args.out_dir {
        spec.out_dir = dir.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn run_experiment(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let spec = spec_for(kind, args)?;
    let table = build_pool(&args.pool)?.install(|| spec.run())?;
    let csv = table.to_csv();
    fs::create_dir_all(&spec.out_dir).with_context(|| format!("creating {}", spec.out_dir.display()))?;
    let csv_path = spec.out_dir.join(format!("{}.csv", kind.file_stem()));
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    println!("wrote {}", csv_path.display());
    if !args.csv_only {
        let svg_path = csv_path.with_extension("svg");
        fs::write(&svg_path, render_svg(kind, &csv)?).with_context(|| format!("writing {}", svg_path.display()))?;
        println!("wrote {}", svg_path.display());
    }
    for key in ["m_star", "crossing_integer", "crossing_k", "crossing_m"] {
        if let Some(v) = table.meta(key) {
            println!("{key} = {v}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, args) = match cli.command {
        Command::RateRegion(a) => (ExperimentKind::RateRegion, a),
        Command::SumRateVsM2User(a) => (ExperimentKind::SumRateVsM2User, a),
        Command::SumRateVsK(a) => (ExperimentKind::SumRateVsK, a),
        Command::SumRateVsM(a) => (ExperimentKind::SumRateVsM, a),
        Command::Validate { seed, pool } => {
            let checks = build_pool(&pool)?.install(|| validate::run_all(seed));
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    };
    run_experiment(kind, &args)?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sdde::experiment::{run_experiment, ExperimentConfig, Preset, ProblemConfig};

/// Coupled Monte Carlo strong-convergence study of the Euler scheme.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths
    #[arg(long)]
    paths: Option<u64>,
    /// table1, table1-holder, table1-poly, zero-noise, additive-noise, zero-coefficient
    #[arg(long)]
    preset: Option<Preset>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: Args) -> sdde::Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.num_paths = paths;
    }
    if let Some(preset) = args.preset {
        config.problem = ProblemConfig::Preset(preset);
    }
    if let Some(out) = args.out {
        config.outputs = out;
    }
    if let Some(workers) = args.workers {
        config.workers = Some(workers);
    }
    let report = run_experiment(&config)?;
    for (level, error) in report.levels.iter().zip(&report.errors) {
        println!("h=2^-{:<3} rmse={error:.6e}", level.exponent);
    }
    match report.slope {
        Some(slope) => println!(
            "slope={slope:.4} (stderr {:.4})",
            report.slope_stderr.unwrap_or(f64::NAN)
        ),
        None => println!("slope=undefined"),
    }
    println!("outputs in {}", config.outputs.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

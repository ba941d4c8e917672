//! Strong convergence of the Euler scheme on the reference parameters.
//!
//! `cargo run --release --example convergence_study -- [paths] [preset]`

use sdde::experiment::{run_study, ExperimentConfig, Preset, ProblemConfig};

fn main() -> sdde::Result<()> {
    let mut args = std::env::args().skip(1);
    let num_paths = args
        .next()
        .map_or(500, |a| a.parse().expect("paths must be an integer"));
    let preset: Preset = args.next().map_or(Ok(Preset::Table1), |a| a.parse())?;

    let config = ExperimentConfig {
        problem: ProblemConfig::Preset(preset),
        num_paths,
        ..ExperimentConfig::default()
    };
    let report = run_study(&config)?;
    println!("{preset}, M = {num_paths}, seed = {}", report.seed);
    println!("{:>10} {:>14} {:>12}", "h", "rmse", "mc stderr");
    for ((level, e), se) in report
        .levels
        .iter()
        .zip(&report.errors)
        .zip(&report.mc_stderr)
    {
        println!(
            "{:>10} {e:>14.6e} {se:>12.2e}",
            format!("2^-{}", level.exponent)
        );
    }
    if let (Some(s), Some(se)) = (report.slope, report.slope_stderr) {
        println!("slope {s:.4} +- {se:.4}");
    }
    Ok(())
}

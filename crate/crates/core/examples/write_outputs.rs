//! Runs a small study and writes the CSV and JSON outputs.
//!
//! `cargo run --release --example write_outputs -- [dir]`

use std::path::PathBuf;

use sdde::experiment::{run_experiment, ExperimentConfig, PLOT_DATA_CSV};

fn main() -> sdde::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("sdde-outputs"), PathBuf::from);
    let config = ExperimentConfig {
        num_paths: 200,
        outputs: dir.clone(),
        ..ExperimentConfig::default()
    };
    print!("{}", config.to_json());
    let report = run_experiment(&config)?;
    println!("slope {:?}, files in {}", report.slope, dir.display());
    print!(
        "{}",
        std::fs::read_to_string(dir.join(PLOT_DATA_CSV)).unwrap()
    );
    Ok(())
}

//! Square-root delay nonlinearities: the coefficients are only Hölder
//! continuous in the delayed argument.

use sdde::experiment::{run_study, ExperimentConfig, Preset, ProblemConfig};

fn main() -> sdde::Result<()> {
    for preset in [Preset::Table1, Preset::Table1Holder, Preset::Table1Poly] {
        let params = preset.params();
        let report = run_study(&ExperimentConfig {
            problem: ProblemConfig::Preset(preset),
            num_paths: 400,
            ..ExperimentConfig::default()
        })?;
        let errors: Vec<String> = report.errors.iter().map(|e| format!("{e:.3e}")).collect();
        println!(
            "l1 = {}, l2 = {}: slope {:+.3}  [{}]",
            params.l1,
            params.l2,
            report.slope.unwrap_or(f64::NAN),
            errors.join(", ")
        );
    }
    Ok(())
}

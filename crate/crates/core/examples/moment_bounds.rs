use sdde::build_test_problem;
use sdde::experiment::Preset;
use sdde::lab::{increment_scaling, moment_estimate, simulate_ensemble};

fn main() -> sdde::Result<()> {
    let problem = build_test_problem(&Preset::Table1.params())?;

    println!("E[sup |X_n|^2] by level:");
    for e in 6..=11 {
        let paths = simulate_ensemble(&problem, 3, 1 << e, 500)?;
        let m = moment_estimate(&paths, 2.0)?;
        println!("  2^{e:<2} {:.5}", m.value);
    }

    let levels: Vec<u64> = (6..=10).map(|e| 1 << e).collect();
    let scaling = increment_scaling(&problem, 3, &levels, 500, 2.0)?;
    println!("E ∫ |X_n(s) - X_n(κ_n(s))|^2 ds:");
    for (n, v) in &scaling.per_level {
        println!("  n = {n:<5} {v:.4e}");
    }
    if let Some(fit) = scaling.fit {
        println!("slope {:.3} (n^-1 expected)", fit.slope);
    }
    Ok(())
}

//! The reference solution of the linear test equation and two checks on it.

use sdde::experiment::Preset;
use sdde::oracle::{fundamental_factor, refinement_study, solve};
use sdde::{BrownianPath, TestProblemParams};

fn main() -> sdde::Result<()> {
    let params = Preset::Table1.params();
    let path = BrownianPath::generate(7, 0, 0.0, 2.0, 1 << 14)?;
    let z = solve(&params, &path)?;
    let steps = z.fine_steps;
    println!(
        "Z(1) = {:.10}, Z(2) = {:.10}",
        z.at_coarse(steps, steps / 2),
        z.terminal()
    );

    // without delay terms the solution is ξ(0) Φ_{0,T}
    let gbm = TestProblemParams {
        b: 0.0,
        beta1: 0.0,
        beta3: 0.0,
        ..params
    };
    let z = solve(&gbm, &path)?.terminal();
    let phi = fundamental_factor(gbm.a, gbm.beta2, &path, 0, path.fine_steps())?;
    println!(
        "reduced problem: Z(2) = {z:.15e}, Φ = {phi:.15e}, rel. diff {:.1e}",
        (z - phi).abs() / phi
    );

    let exponents = [6, 8, 10, 12];
    let rms = refinement_study(&params, 11, 100, &exponents, 16)?;
    for (e, r) in exponents.iter().zip(&rms) {
        println!("quadrature 2^{e:<2} per period: RMS distance to 2^16 = {r:.3e}");
    }
    Ok(())
}

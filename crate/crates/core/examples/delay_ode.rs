//! Deterministic delay equation `X'(t) = X(t-1)`, `X = 1` on `[-1, 0]`.
//! Euler against the method of steps; the error halves with `h`.

use sdde::experiment::Preset;
use sdde::lab::fit_rate;
use sdde::oracle::method_of_steps_ode;
use sdde::{build_test_problem, integrate};

fn main() -> sdde::Result<()> {
    let params = Preset::ZeroNoise.params();
    let problem = build_test_problem(&params)?;
    let exact = method_of_steps_ode(&params, 2.0)?;
    println!("X(2) by the method of steps: {exact}");

    let mut ns = Vec::new();
    let mut errors = Vec::new();
    for e in 2..=10 {
        let n = 1u64 << e;
        let silent = vec![0.0; 2 * n as usize];
        let path = integrate(&problem, &[&silent], n)?;
        let x = path.terminal()[0];
        println!(
            "h = 2^-{e:<2}  X_n(2) = {x:.12}  error = {:.3e}",
            (x - exact).abs()
        );
        ns.push(n);
        errors.push((x - exact).abs());
    }
    let fit = fit_rate(&ns, &errors)?;
    println!("slope {:.4} +- {:.4}", fit.slope, fit.stderr);
    Ok(())
}

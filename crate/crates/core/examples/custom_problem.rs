//! A two-dimensional system with both a fixed lag and a piecewise-constant
//! delay, built from closures.

use std::sync::Arc;

use sdde::model::FnCoefficients;
use sdde::{integrate_on, validate_delays, BrownianPath, DelaySpec, InitialSegment, SddeProblem};

fn main() -> sdde::Result<()> {
    // Y = (X(t - 1), X([t])), each of dimension 2
    let coeffs = Arc::new(FnCoefficients::new(
        2,
        1,
        |_, y: &[f64], x: &[f64], out: &mut [f64]| {
            out[0] = -x[0] + 0.5 * y[1];
            out[1] = -2.0 * x[1] + y[2].sin();
        },
        |_, y: &[f64], x: &[f64], out: &mut [f64]| {
            out[0] = 0.2 * x[0];
            out[1] = 0.1 * (1.0 + y[3].abs()).sqrt();
        },
    ));
    let problem = SddeProblem::new(
        coeffs.clone(),
        vec![DelaySpec::constant_lag(1.0)?, DelaySpec::PiecewiseFloor],
        InitialSegment::new(1.0, 2, 1.0, |t, out| {
            out[0] = 1.0 + t;
            out[1] = (3.0 * t).cos();
        })?,
        1.0,
        4.0,
    )?;
    let check = validate_delays(&problem, 256);
    println!(
        "delays valid on {} grid points: {}",
        check.checked_points,
        check.is_valid()
    );

    let noise = BrownianPath::generate(1, 0, 0.0, 4.0, 1 << 12)?;
    for n in [16, 128, 1024] {
        let path = integrate_on(&problem, &noise, n)?;
        let x = path.terminal();
        println!("n = {n:<4} X(4) = ({:+.6}, {:+.6})", x[0], x[1]);
    }

    let bad = SddeProblem::new(
        coeffs,
        vec![
            DelaySpec::custom("identity", |t| t),
            DelaySpec::PiecewiseFloor,
        ],
        problem.initial().clone(),
        1.0,
        4.0,
    )?;
    match integrate_on(&bad, &noise, 16) {
        Err(e) => println!("δ(t) = t is rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

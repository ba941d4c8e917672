//! End-to-end acceptance criteria. Each test writes one `PASS`/`FAIL` line
//! to stderr (uncaptured) with the measured quantities.

use std::io::Write;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use sdde::experiment::{
    run_experiment, run_study, ExperimentConfig, Output, Preset, ProblemConfig,
};
use sdde::lab::{fit_rate, increment_scaling, moment_estimate, simulate_ensemble, ErrorNorm};
use sdde::model::{kappa, signed_pow, validate_delays, DelaySpec, FnCoefficients, InitialSegment};
use sdde::oracle::{fundamental_factor, method_of_steps_ode, refinement_study, solve};
use sdde::{
    build_test_problem, integrate, BrownianPath, InitialFunction, SddeProblem, TestProblemParams,
};

fn report(criterion: &str, pass: bool, detail: String) {
    let line = format!(
        "[acceptance] criterion {criterion}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    std::io::stderr().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn study(preset: Preset) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemConfig::Preset(preset),
        levels: (6..=11).collect(),
        fine_exponent: 15,
        num_paths: 2000,
        seed: 42,
        p: 2.0,
        ..ExperimentConfig::default()
    }
}

#[test]
fn criterion_1_table_reproduction() {
    let r = run_study(&study(Preset::Table1)).unwrap();
    let slope = r.slope.unwrap();
    let se = r.slope_stderr.unwrap();
    let pass = r.strictly_decreasing() && slope <= -0.45 && se < 0.1;
    report(
        "1",
        pass,
        format!("errors={} slope={slope:.4} stderr={se:.4}", sci(&r.errors)),
    );
}

#[test]
fn criterion_2_holder_delay() {
    let r = run_study(&study(Preset::Table1Holder)).unwrap();
    let slope = r.slope.unwrap();
    report(
        "2",
        slope <= -0.25,
        format!("errors={} slope={slope:.4}", sci(&r.errors)),
    );
}

#[test]
fn criterion_3_increment_scaling() {
    let problem = build_test_problem(&Preset::Table1.params()).unwrap();
    let levels: Vec<u64> = (6..=10).map(|e| 1 << e).collect();
    let out = increment_scaling(&problem, 42, &levels, 1000, 2.0).unwrap();
    let slope = out.fit.unwrap().slope;
    report(
        "3",
        (slope + 1.0).abs() <= 0.15,
        format!("slope={slope:.4}"),
    );
}

#[test]
fn criterion_4_moment_uniformity() {
    let problem = build_test_problem(&Preset::Table1.params()).unwrap();
    let values: Vec<f64> = (6..=11)
        .map(|e| {
            let paths = simulate_ensemble(&problem, 42, 1 << e, 2000).unwrap();
            moment_estimate(&paths, 2.0).unwrap().value
        })
        .collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / min;
    let pass = values.iter().all(|v| v.is_finite()) && spread <= 0.25;
    report(
        "4",
        pass,
        format!("moments={values:.4?} spread={spread:.4}"),
    );
}

fn zero_noise_terminal(n: u64) -> f64 {
    let problem = build_test_problem(&Preset::ZeroNoise.params()).unwrap();
    let silent = vec![0.0; 2 * n as usize];
    integrate(&problem, &[&silent], n).unwrap().terminal()[0]
}

#[test]
fn criterion_5a_deterministic_order() {
    let exact = method_of_steps_ode(&Preset::ZeroNoise.params(), 2.0).unwrap();
    let ns: Vec<u64> = (4..=10).map(|e| 1 << e).collect();
    let errors: Vec<f64> = ns
        .iter()
        .map(|&n| (zero_noise_terminal(n) - exact).abs())
        .collect();
    let slope = fit_rate(&ns, &errors).unwrap().slope;
    let pass = (exact - 3.5).abs() < 1e-12 && (slope + 1.0).abs() <= 0.05;
    report("5a", pass, format!("exact={exact} slope={slope:.5}"));
}

#[test]
fn criterion_5b_quarter_step_value() {
    let x = zero_noise_terminal(4);
    report(
        "5b",
        x == 3.28125,
        format!("X(2) at h=0.25 is {x}, expected 3.28125"),
    );
}

#[test]
fn criterion_6_additive_noise() {
    let mut worst = 0.0f64;
    for seed in [0u64, 1, 42, 12345, u64::MAX] {
        for norm in [ErrorNorm::Terminal, ErrorNorm::Sup] {
            let r = run_study(&ExperimentConfig {
                problem: ProblemConfig::Preset(Preset::AdditiveNoise),
                levels: (0..=11).collect(),
                fine_exponent: 15,
                num_paths: 200,
                seed,
                norm,
                ..ExperimentConfig::default()
            })
            .unwrap();
            worst = r.errors.iter().cloned().fold(worst, f64::max);
        }
    }
    report("6", worst <= 1e-14, format!("max error={worst:e}"));
}

#[test]
fn criterion_7_oracle_consistency() {
    let gbm = TestProblemParams {
        b: 0.0,
        beta1: 0.0,
        beta3: 0.0,
        ..Preset::Table1.params()
    };
    let mut worst = 0.0f64;
    for stream in 0..100 {
        let path = BrownianPath::generate(42, stream, 0.0, 2.0, 1 << 12).unwrap();
        let z = solve(&gbm, &path).unwrap().terminal();
        let phi = fundamental_factor(gbm.a, gbm.beta2, &path, 0, path.fine_steps()).unwrap();
        worst = worst.max(((z - phi) / phi).abs());
    }

    let exponents = [6, 8, 10, 12];
    let rms = refinement_study(&Preset::Table1.params(), 42, 100, &exponents, 16).unwrap();
    let ratios: Vec<f64> = rms.windows(2).map(|w| w[1] / w[0]).collect();
    let ns: Vec<u64> = exponents.iter().map(|&e| 1 << e).collect();
    let slope = fit_rate(&ns, &rms).unwrap().slope;
    // halving per 4x refinement is a log2-log2 slope of -1/2
    let pass = worst <= 1e-12 && slope <= -0.5;
    report(
        "7",
        pass,
        format!(
            "gbm rel err={worst:e} rms={} ratios={ratios:.3?} slope={slope:.4}",
            sci(&rms)
        ),
    );
}

fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn delay_problem(delay: DelaySpec) -> SddeProblem {
    let coeffs = FnCoefficients::new(
        1,
        1,
        |_, y: &[f64], _: &[f64], out: &mut [f64]| out[0] = y[0],
        |_, _: &[f64], _: &[f64], out: &mut [f64]| out[0] = 0.0,
    );
    SddeProblem::new(
        std::sync::Arc::new(coeffs),
        vec![delay],
        InitialSegment::scalar(1.0, InitialFunction::TABLE1).unwrap(),
        1.0,
        2.0,
    )
    .unwrap()
}

#[test]
fn criterion_8_property_suites() {
    let mut failures = Vec::new();

    let kappa_props = run_property(
        100_000,
        (
            1u64..1 << 20,
            -100.0f64..100.0,
            0.0f64..100.0,
            0u64..1 << 16,
        ),
        |(n, t0, dt, j)| {
            let t = t0 + dt;
            let k = kappa(n, t0, t).unwrap();
            prop_assert!(k <= t && t - k < 1.0 / n as f64);
            prop_assert_eq!(kappa(n, t0, k).unwrap(), k);
            let grid_point = t0 + j as f64 / n as f64;
            prop_assert_eq!(kappa(n, t0, grid_point).unwrap(), grid_point);
            Ok(())
        },
    );
    if let Err(e) = kappa_props {
        failures.push(format!("kappa: {e}"));
    }

    let pow_props = run_property(100_000, (-1e6f64..1e6, 0.01f64..8.0), |(z, l)| {
        prop_assert_eq!(signed_pow(-z, l), -signed_pow(z, l));
        prop_assert_eq!(signed_pow(z, 1.0), z);
        Ok(())
    });
    if let Err(e) = pow_props {
        failures.push(format!("signed_pow: {e}"));
    }

    let coupling = run_property(
        256,
        (any::<u64>(), any::<u64>(), 4u32..14, 0u32..4),
        |(seed, stream, fine, drop)| {
            let fine_steps = 1usize << fine;
            let path = BrownianPath::generate(seed, stream, 0.0, 2.0, fine_steps).unwrap();
            let factor = 1usize << drop.min(fine);
            let coarse = path.coarsened(factor).unwrap();
            for k in 0..=coarse.fine_steps() {
                prop_assert_eq!(
                    coarse.wiener_value(k).unwrap().to_bits(),
                    path.wiener_value(k * factor).unwrap().to_bits()
                );
            }
            let direct = path.coarsen(factor).unwrap();
            prop_assert_eq!(direct.as_slice(), coarse.increments());
            Ok(())
        },
    );
    if let Err(e) = coupling {
        failures.push(format!("coupling: {e}"));
    }

    let lag_ok =
        validate_delays(&delay_problem(DelaySpec::constant_lag(1.0).unwrap()), 1024).is_valid();
    let floor_ok = validate_delays(&delay_problem(DelaySpec::PiecewiseFloor), 1024).is_valid();
    let identity_rejected =
        !validate_delays(&delay_problem(DelaySpec::custom("identity", |t| t)), 1024).is_valid();
    if !(lag_ok && floor_ok && identity_rejected) {
        failures.push(format!(
            "delay validation: lag {lag_ok}, floor {floor_ok}, identity rejected {identity_rejected}"
        ));
    }

    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<Vec<Vec<u8>>> = [1usize, 2, 4]
        .iter()
        .map(|&w| {
            let config = ExperimentConfig {
                levels: (3..=7).collect(),
                fine_exponent: 11,
                num_paths: 300,
                workers: Some(w),
                outputs: dir.path().join(format!("w{w}")),
                emit: vec![Output::ErrorsCsv, Output::ReportJson, Output::PlotData],
                ..study(Preset::Table1)
            };
            run_experiment(&config).unwrap();
            ["errors.csv", "report.json", "plot_data.csv"]
                .iter()
                .map(|f| std::fs::read(config.outputs.join(f)).unwrap())
                .collect()
        })
        .collect();
    if outputs.windows(2).any(|w| w[0] != w[1]) {
        failures.push("outputs differ across worker counts".into());
    }

    report("8", failures.is_empty(), format!("{failures:?}"));
}

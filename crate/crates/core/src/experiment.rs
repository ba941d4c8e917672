//! Configuration-driven convergence experiments on the linear test
//! equation, with CSV and JSON outputs.
//!
//! Stream `i` draws one fine Brownian path from `(seed, i)`; the reference
//! solution and every Euler level for that stream are driven by
//! coarsenings of that single path.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::BrownianPath;
use crate::error::{Result, SddeError};
use crate::integrator::{integrate_on, EulerPath};
use crate::lab::{ConvergenceReport, ErrorNorm, Level};
use crate::model::{build_test_problem, InitialFunction, TestProblemParams};
use crate::oracle::{self, OracleSolution};

pub const ERRORS_CSV: &str = "errors.csv";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT_DATA_CSV: &str = "plot_data.csv";

pub const ERRORS_HEADER: &str = "h,n,rmse,mc_stderr,num_paths,p,seed";
pub const PLOT_HEADER: &str = "log2_n,log2_error,series";

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// The reference parameters with `l1 = l2 = 1`.
    Table1,
    /// As `table1` with `l1 = l2 = 1/2`.
    Table1Holder,
    /// As `table1` with `l1 = 2, l2 = 3`.
    Table1Poly,
    /// `dZ = Z(t-1) dt`, `ξ ≡ 1`.
    ZeroNoise,
    /// `dZ = dW`.
    AdditiveNoise,
    /// `dZ = 0`.
    ZeroCoefficient,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Table1,
        Preset::Table1Holder,
        Preset::Table1Poly,
        Preset::ZeroNoise,
        Preset::AdditiveNoise,
        Preset::ZeroCoefficient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table1Holder => "table1-holder",
            Preset::Table1Poly => "table1-poly",
            Preset::ZeroNoise => "zero-noise",
            Preset::AdditiveNoise => "additive-noise",
            Preset::ZeroCoefficient => "zero-coefficient",
        }
    }

    pub fn params(self) -> TestProblemParams {
        let base = TestProblemParams::table1(1.0, 1.0);
        match self {
            Preset::Table1 => base,
            Preset::Table1Holder => TestProblemParams::table1(0.5, 0.5),
            Preset::Table1Poly => TestProblemParams::table1(2.0, 3.0),
            Preset::ZeroNoise => TestProblemParams {
                a: 0.0,
                b: 1.0,
                beta1: 0.0,
                beta2: 0.0,
                beta3: 0.0,
                xi: InitialFunction::Constant { value: 1.0 },
                ..base
            },
            Preset::AdditiveNoise => TestProblemParams {
                a: 0.0,
                b: 0.0,
                beta1: 1.0,
                beta2: 0.0,
                beta3: 0.0,
                ..base
            },
            Preset::ZeroCoefficient => TestProblemParams {
                a: 0.0,
                b: 0.0,
                beta1: 0.0,
                beta2: 0.0,
                beta3: 0.0,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SddeError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                SddeError::config(
                    "preset",
                    format!("unknown preset `{s}`, expected one of {}", known.join(", ")),
                )
            })
    }
}

/// Either a preset name or explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemConfig {
    Preset(Preset),
    Params(TestProblemParams),
}

impl ProblemConfig {
    pub fn params(&self) -> TestProblemParams {
        match self {
            ProblemConfig::Preset(p) => p.params(),
            ProblemConfig::Params(p) => *p,
        }
    }
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Preset(Preset::Table1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    ErrorsCsv,
    ReportJson,
    PlotData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    /// Euler levels as exponents `N`, `h = τ / 2^N`.
    pub levels: Vec<u32>,
    /// Reference grid exponent.
    pub fine_exponent: u32,
    pub num_paths: u64,
    pub seed: u64,
    /// Moment order of the strong error.
    pub p: f64,
    pub outputs: PathBuf,
    pub emit: Vec<Output>,
    /// Thread count; `None` uses rayon's global pool.
    pub workers: Option<usize>,
    pub norm: ErrorNorm,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemConfig::default(),
            levels: (6..=11).collect(),
            fine_exponent: 15,
            num_paths: 2000,
            seed: 42,
            p: 2.0,
            outputs: PathBuf::from("out"),
            emit: vec![Output::ErrorsCsv, Output::ReportJson, Output::PlotData],
            workers: None,
            norm: ErrorNorm::Terminal,
        }
    }
}

/// The largest supported grid exponent.
pub const MAX_EXPONENT: u32 = 28;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SddeError::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.params().validate()?;
        if self.levels.is_empty() {
            return Err(SddeError::config(
                "levels",
                "at least one level is required",
            ));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SddeError::config(
                "levels",
                "levels must be strictly ascending",
            ));
        }
        let max = *self.levels.last().unwrap();
        if self.fine_exponent < max.saturating_add(4) {
            return Err(SddeError::config(
                "fine_exponent",
                format!(
                    "must be at least max(levels) + 4 = {}, got {}",
                    max + 4,
                    self.fine_exponent
                ),
            ));
        }
        if self.fine_exponent > MAX_EXPONENT {
            return Err(SddeError::config(
                "fine_exponent",
                format!("must be at most {MAX_EXPONENT}, got {}", self.fine_exponent),
            ));
        }
        if self.num_paths == 0 {
            return Err(SddeError::config("num_paths", "must be at least 1"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(SddeError::config(
                "p",
                format!("must be positive, got {}", self.p),
            ));
        }
        if self.workers == Some(0) {
            return Err(SddeError::config("workers", "must be at least 1"));
        }
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> SddeError {
    SddeError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn pathwise_difference(norm: ErrorNorm, reference: &OracleSolution, euler: &EulerPath) -> f64 {
    match norm {
        ErrorNorm::Terminal => (reference.terminal() - euler.terminal()[0]).abs(),
        ErrorNorm::Sup => {
            let steps = euler.len() - 1;
            euler
                .iter()
                .enumerate()
                .map(|(j, x)| (reference.at_coarse(steps, j) - x[0]).abs())
                .fold(0.0, f64::max)
        }
    }
}

fn stream_error(stream: u64, level: u32, source: SddeError) -> SddeError {
    SddeError::Stream {
        stream,
        level,
        source: Box::new(source),
    }
}

/// Coupled differences of one stream, one per level.
fn run_stream(
    config: &ExperimentConfig,
    params: &TestProblemParams,
    stream: u64,
) -> Result<Vec<f64>> {
    let problem = build_test_problem(params)?;
    let fine = 2usize << config.fine_exponent;
    let path = BrownianPath::generate(config.seed, stream, 0.0, problem.horizon(), fine)
        .map_err(|e| stream_error(stream, config.fine_exponent, e))?;
    let reference =
        oracle::solve(params, &path).map_err(|e| stream_error(stream, config.fine_exponent, e))?;
    config
        .levels
        .iter()
        .map(|&level| {
            let euler = integrate_on(&problem, &path, 1 << level)
                .map_err(|e| stream_error(stream, level, e))?;
            if euler.noise_source() != reference.path_ref {
                return Err(stream_error(
                    stream,
                    level,
                    SddeError::Invalid(
                        "scheme and reference were driven by different Brownian paths".into(),
                    ),
                ));
            }
            Ok(pathwise_difference(config.norm, &reference, &euler))
        })
        .collect()
}

/// Runs the coupled Monte Carlo study without writing anything.
pub fn run_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let params = config.problem.params();
    let work = || -> Result<Vec<Vec<f64>>> {
        (0..config.num_paths)
            .into_par_iter()
            .map(|stream| run_stream(config, &params, stream))
            .collect()
    };
    let rows = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| SddeError::config("workers", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let diffs: Vec<Vec<f64>> = (0..config.levels.len())
        .map(|k| rows.iter().map(|row| row[k]).collect())
        .collect();
    let levels = config
        .levels
        .iter()
        .map(|&e| Level::new(e, params.tau))
        .collect();
    let mut report = ConvergenceReport::from_differences(levels, &diffs, config.p, config.seed)?;
    report.norm = config.norm;
    Ok(report)
}

/// [`run_study`], then writes the requested files into `config.outputs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let report = run_study(config)?;
    fs::create_dir_all(&config.outputs).map_err(|e| io_error(&config.outputs, e))?;
    for output in &config.emit {
        match output {
            Output::ErrorsCsv => {
                write_file(&config.outputs.join(ERRORS_CSV), &errors_csv(&report))?
            }
            Output::ReportJson => {
                write_file(&config.outputs.join(REPORT_JSON), &report_json(&report))?
            }
            Output::PlotData => emit_plot_data(&report, &config.outputs.join(PLOT_DATA_CSV))?,
        }
    }
    Ok(report)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn errors_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(ERRORS_HEADER);
    out.push('\n');
    for (k, level) in report.levels.iter().enumerate() {
        writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{},{:.16e},{}",
            level.h,
            level.n_per_tau,
            report.errors[k],
            report.mc_stderr[k],
            report.num_paths,
            report.p,
            report.seed
        )
        .unwrap();
    }
    out
}

pub fn report_json(report: &ConvergenceReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

/// Data points `(log2 n, log2 error)` followed by a reference line of
/// slope -1/2 through the first point.
pub fn plot_data(report: &ConvergenceReport) -> Result<String> {
    if report.levels.len() < 2 {
        return Err(SddeError::Invalid(format!(
            "plot data needs at least 2 levels, got {}",
            report.levels.len()
        )));
    }
    if let Some((index, &value)) = report.errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(SddeError::NonPositive { index, value });
    }
    let xs: Vec<f64> = report
        .levels
        .iter()
        .map(|l| (l.n_per_tau as f64).log2())
        .collect();
    let ys: Vec<f64> = report.errors.iter().map(|e| e.log2()).collect();
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for (x, y) in xs.iter().zip(&ys) {
        writeln!(out, "{x},{y:.16e},data").unwrap();
    }
    for x in &xs {
        writeln!(out, "{x},{:.16e},reference", ys[0] - 0.5 * (x - xs[0])).unwrap();
    }
    Ok(out)
}

pub fn emit_plot_data(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_file(path, &plot_data(report)?)
}

//! Monte Carlo estimators: strong errors, log-log rate fits, and the
//! moment and increment statistics of the discrete scheme.
//!
//! Every reduction over an ensemble is a pairwise sum in stream order, so
//! results do not depend on how the per-path work was scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{pairwise_sum, BrownianPath};
use crate::error::{Result, SddeError};
use crate::integrator::{integrate_observed, EulerPath};
use crate::model::SddeProblem;

/// How the pathwise error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `|Z(T) - Z_n(T)|`
    #[default]
    Terminal,
    /// `max_j |Z(t_j) - Z_n(t_j)|` over the scheme's grid.
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// `h = τ / 2^exponent`
    pub exponent: u32,
    pub n_per_tau: u64,
    pub h: f64,
}

impl Level {
    pub fn new(exponent: u32, tau: f64) -> Self {
        let n_per_tau = 1u64 << exponent;
        Level {
            exponent,
            n_per_tau,
            h: tau / n_per_tau as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<Level>,
    /// `(E|Z - Z_n|^p)^(1/p)` per level.
    pub errors: Vec<f64>,
    /// Monte Carlo standard error of each entry of `errors`.
    pub mc_stderr: Vec<f64>,
    pub num_paths: u64,
    pub seed: u64,
    pub p: f64,
    pub norm: ErrorNorm,
    /// Slope of `log2(error)` against `log2(n)`; absent with fewer than
    /// three levels or any zero error.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Some level has exactly zero error.
    pub degenerate: bool,
}

impl ConvergenceReport {
    /// Assembles a report from per-path error magnitudes, `diffs[level][stream]`.
    pub fn from_differences(
        levels: Vec<Level>,
        diffs: &[Vec<f64>],
        p: f64,
        seed: u64,
    ) -> Result<Self> {
        if diffs.len() != levels.len() {
            return Err(SddeError::LengthMismatch {
                expected: levels.len(),
                actual: diffs.len(),
            });
        }
        let num_paths = diffs.first().map_or(0, Vec::len) as u64;
        let mut errors = Vec::with_capacity(levels.len());
        let mut mc_stderr = Vec::with_capacity(levels.len());
        for column in diffs {
            let (e, se) = error_with_stderr(column, p)?;
            errors.push(e);
            mc_stderr.push(se);
        }
        let degenerate = errors.contains(&0.0);
        let ns: Vec<u64> = levels.iter().map(|l| l.n_per_tau).collect();
        let fit = if levels.len() >= 3 && !degenerate {
            Some(fit_rate(&ns, &errors)?)
        } else {
            None
        };
        Ok(ConvergenceReport {
            levels,
            errors,
            mc_stderr,
            num_paths,
            seed,
            p,
            norm: ErrorNorm::Terminal,
            slope: fit.map(|f| f.slope),
            slope_stderr: fit.map(|f| f.stderr),
            degenerate,
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(SddeError::config(
            "p",
            format!("moment order must be positive, got {p}"),
        ))
    }
}

/// `(mean |ref - euler|^p)^(1/p)` over coupled pairs.
pub fn strong_error(reference: &[f64], euler: &[f64], p: f64) -> Result<f64> {
    if reference.len() != euler.len() {
        return Err(SddeError::LengthMismatch {
            expected: reference.len(),
            actual: euler.len(),
        });
    }
    let diffs: Vec<f64> = reference
        .iter()
        .zip(euler)
        .map(|(r, e)| (r - e).abs())
        .collect();
    Ok(error_with_stderr(&diffs, p)?.0)
}

/// Vector-state variant of [`strong_error`] using the Euclidean norm.
pub fn strong_error_states(reference: &[&[f64]], euler: &[&[f64]], p: f64) -> Result<f64> {
    if reference.len() != euler.len() {
        return Err(SddeError::LengthMismatch {
            expected: reference.len(),
            actual: euler.len(),
        });
    }
    let diffs = reference
        .iter()
        .zip(euler)
        .map(|(r, e)| {
            if r.len() != e.len() {
                return Err(SddeError::LengthMismatch {
                    expected: r.len(),
                    actual: e.len(),
                });
            }
            Ok(r.iter()
                .zip(*e)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(error_with_stderr(&diffs, p)?.0)
}

/// `L^p` norm of the magnitudes in `diffs` and its delta-method standard
/// error.
pub fn error_with_stderr(diffs: &[f64], p: f64) -> Result<(f64, f64)> {
    check_p(p)?;
    if diffs.is_empty() {
        return Err(SddeError::Invalid(
            "strong error needs at least one pair".into(),
        ));
    }
    let m = diffs.len() as f64;
    let powered: Vec<f64> = diffs.iter().map(|d| d.abs().powf(p)).collect();
    let mean = pairwise_sum(&powered) / m;
    let error = mean.powf(1.0 / p);
    if diffs.len() < 2 || mean == 0.0 {
        return Ok((error, 0.0));
    }
    let centred: Vec<f64> = powered.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&centred) / (m - 1.0);
    let se_mean = (var / m).sqrt();
    // d/dm m^(1/p) = m^(1/p - 1) / p
    Ok((error, error / (p * mean) * se_mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Least squares of `log2(error)` on `log2(n)`.
pub fn fit_rate(levels: &[u64], errors: &[f64]) -> Result<RateFit> {
    let xs: Vec<f64> = levels.iter().map(|&n| (n as f64).log2()).collect();
    fit_log2(&xs, errors)
}

/// As [`fit_rate`] with the abscissae already in `log2`.
pub fn fit_log2(log2_n: &[f64], errors: &[f64]) -> Result<RateFit> {
    if log2_n.len() != errors.len() {
        return Err(SddeError::LengthMismatch {
            expected: log2_n.len(),
            actual: errors.len(),
        });
    }
    if errors.len() < 3 {
        return Err(SddeError::Invalid(format!(
            "rate fit needs at least 3 levels, got {}",
            errors.len()
        )));
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(SddeError::NonPositive { index, value });
    }
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let k = log2_n.len() as f64;
    let mx = log2_n.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = log2_n.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SddeError::Invalid("rate fit needs distinct levels".into()));
    }
    let sxy: f64 = log2_n
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = log2_n
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        stderr,
        intercept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    /// Estimate of `E[max_j |X_n(t_j)|^p]`.
    pub value: f64,
    pub num_paths: u64,
    pub level: u64,
}

/// Mean over paths of `(max over the grid of |X_n|)^p`.
pub fn moment_estimate(paths: &[EulerPath], p: f64) -> Result<MomentEstimate> {
    check_p(p)?;
    let first = paths
        .first()
        .ok_or_else(|| SddeError::Invalid("moment estimate needs a non-empty ensemble".into()))?;
    let level = first.n_per_tau();
    let sups: Vec<f64> = paths
        .iter()
        .map(|path| {
            path.iter()
                .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
                .powf(p)
        })
        .collect();
    Ok(MomentEstimate {
        p,
        value: pairwise_sum(&sups) / paths.len() as f64,
        num_paths: paths.len() as u64,
        level,
    })
}

/// Generates the `m` Brownian components of Monte Carlo path `index`,
/// at `steps` fine steps over `[0, T]`. Component `c` uses stream
/// `index * m + c`.
pub fn brownian_components(
    problem: &SddeProblem,
    seed: u64,
    index: u64,
    steps: usize,
) -> Result<Vec<BrownianPath>> {
    let m = problem.dim_noise() as u64;
    (0..m)
        .map(|c| BrownianPath::generate(seed, index * m + c, 0.0, problem.horizon(), steps))
        .collect()
}

/// Runs `num_paths` Euler paths at `n_per_tau`, noise for path `i` drawn
/// from [`brownian_components`].
pub fn simulate_ensemble(
    problem: &SddeProblem,
    seed: u64,
    n_per_tau: u64,
    num_paths: u64,
) -> Result<Vec<EulerPath>> {
    let steps = (problem.periods() * n_per_tau) as usize;
    (0..num_paths)
        .into_par_iter()
        .map(|i| {
            let components = brownian_components(problem, seed, i, steps)?;
            let noise: Vec<&[f64]> = components.iter().map(BrownianPath::increments).collect();
            crate::integrator::integrate(problem, &noise, n_per_tau)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementScaling {
    /// `(n_per_tau, estimate of E ∫ |X_n(s) - X_n(κ_n(s))|^p ds)`
    pub per_level: Vec<(u64, f64)>,
    /// `None` when some estimate is zero (degenerate problem).
    pub fit: Option<RateFit>,
}

/// Estimates `E ∫_0^T |X_n(s) - X_n(κ_n(s))|^p ds` at each level by
/// midpoint sampling: `X_n` at the midpoint of each step is one half-step
/// of the scheme, driven by the first half of that step's increment.
pub fn increment_scaling(
    problem: &SddeProblem,
    seed: u64,
    levels: &[u64],
    num_paths: u64,
    p: f64,
) -> Result<IncrementScaling> {
    check_p(p)?;
    if levels.len() < 3 {
        return Err(SddeError::Invalid(format!(
            "increment scaling needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if num_paths == 0 {
        return Err(SddeError::config("num_paths", "must be at least 1"));
    }
    let max_n = *levels.iter().max().unwrap();
    let fine = (problem.periods() * 2 * max_n) as usize;
    let d = problem.dim_state();
    let m = problem.dim_noise();

    let rows: Vec<Vec<f64>> = (0..num_paths)
        .into_par_iter()
        .map(|i| {
            let components = brownian_components(problem, seed, i, fine)?;
            levels
                .iter()
                .map(|&n| {
                    let steps = (problem.periods() * n) as usize;
                    let coarse = components
                        .iter()
                        .map(|c| c.increments_at(steps))
                        .collect::<Result<Vec<_>>>()?;
                    let halves = components
                        .iter()
                        .map(|c| c.increments_at(2 * steps))
                        .collect::<Result<Vec<_>>>()?;
                    let mut terms = Vec::with_capacity(steps);
                    integrate_observed(problem, &coarse, n, |view| {
                        let j = view.index;
                        let mut norm2 = 0.0;
                        for r in 0..d {
                            let mut inc = view.drift[r] * 0.5 * view.h;
                            for (c, half) in halves.iter().enumerate() {
                                inc += view.diffusion[r * m + c] * half[2 * j];
                            }
                            norm2 += inc * inc;
                        }
                        terms.push(view.h * norm2.sqrt().powf(p));
                    })?;
                    Ok(pairwise_sum(&terms))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let per_level: Vec<(u64, f64)> = levels
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let column: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            (n, pairwise_sum(&column) / num_paths as f64)
        })
        .collect();
    let fit = if per_level.iter().all(|&(_, v)| v > 0.0) {
        let ns: Vec<u64> = per_level.iter().map(|l| l.0).collect();
        let vs: Vec<f64> = per_level.iter().map(|l| l.1).collect();
        Some(fit_rate(&ns, &vs)?)
    } else {
        None
    };
    Ok(IncrementScaling { per_level, fit })
}

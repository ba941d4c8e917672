//! Reference solutions for the scalar test family.
//!
//! On each period the equation is linear in the current state with a
//! forcing that depends only on the previous period, so the solution is
//!
//! ```text
//! Z(t) = Φ(r,t) { Z(r) + ∫_r^t Φ(r,s)^-1 [f(s) - β2 g(s)] ds + ∫_r^t Φ(r,s)^-1 g(s) dW(s) }
//! Φ(r,t) = exp((a - β2²/2)(t - r) + β2 (W(t) - W(r)))
//! f(s) = b Z(s-τ)^l1,   g(s) = β1 + β3 Z(s-τ)^l2
//! ```
//!
//! with `r = 0` on `[0, τ]` and `r = τ` on `[τ, 2τ]`. Both integrals are
//! evaluated by left-point sums on the fine grid of the Brownian path,
//! which is the Itô-consistent choice for the stochastic one.
//!
//! [`method_of_steps_ode`] is an independent deterministic check that
//! integrates the `β ≡ 0` reduction by adaptive Gauss–Legendre quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{pairwise_sum, BrownianPath, PathRef};
use crate::error::{Result, SddeError};
use crate::model::{signed_pow, TestProblemParams};

/// Coarsest admissible oracle grid, in fine steps per delay period.
pub const MIN_FINE_STEPS_PER_TAU: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    /// Fine steps over `[0, 2τ]`.
    pub fine_steps: usize,
    /// `Z` at every fine grid point of `[0, 2τ]`.
    pub values: Vec<f64>,
    pub quadrature_step: f64,
    pub path_ref: Option<PathRef>,
}

impl OracleSolution {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `Z` at grid point `j` of a grid with `steps` steps over `[0, 2τ]`.
    pub fn at_coarse(&self, steps: usize, j: usize) -> f64 {
        self.values[j * (self.fine_steps / steps)]
    }
}

/// `exp((a - β2²/2)(t - s) + β2 (W(t) - W(s)))` between fine grid indices.
pub fn fundamental_factor(
    a: f64,
    beta2: f64,
    path: &BrownianPath,
    s_index: usize,
    t_index: usize,
) -> Result<f64> {
    if s_index > t_index {
        return Err(SddeError::Invalid(format!(
            "fundamental factor needs s_index <= t_index, got {s_index} > {t_index}"
        )));
    }
    let h = path.fine_step();
    let ws = path.wiener_value(s_index)?;
    let wt = path.wiener_value(t_index)?;
    let elapsed = (t_index - s_index) as f64 * h;
    Ok(((a - 0.5 * beta2 * beta2) * elapsed + beta2 * (wt - ws)).exp())
}

/// Fine steps per delay period, after checking that `path` starts at 0,
/// is aligned with `τ`, covers `periods` periods and is fine enough.
fn steps_per_tau(params: &TestProblemParams, path: &BrownianPath, periods: usize) -> Result<usize> {
    let h = path.fine_step();
    let per_tau = (params.tau / h).round();
    if path.t0() != 0.0 || (per_tau * h - params.tau).abs() > 1e-12 * params.tau {
        return Err(SddeError::GridMismatch(format!(
            "path on [{}, {}] with step {h} is not aligned with tau={}",
            path.t0(),
            path.t1(),
            params.tau
        )));
    }
    let per_tau = per_tau as usize;
    if per_tau < MIN_FINE_STEPS_PER_TAU {
        return Err(SddeError::config(
            "fine_steps",
            format!("{per_tau} steps per period is below the minimum {MIN_FINE_STEPS_PER_TAU}"),
        ));
    }
    if path.fine_steps() < periods * per_tau {
        return Err(SddeError::GridMismatch(format!(
            "path has {} steps, {} periods need {}",
            path.fine_steps(),
            periods,
            periods * per_tau
        )));
    }
    Ok(per_tau)
}

/// Evaluates the variation-of-constants formula on one period starting at
/// fine index `start`, with the delayed values supplied by `delayed(k)` for
/// `k = 0..per_tau` (the value of `Z(s_k - τ)` at the `k`-th point).
fn segment<D>(
    params: &TestProblemParams,
    w: &[f64],
    dw: &[f64],
    h: f64,
    start: usize,
    per_tau: usize,
    z_start: f64,
    delayed: D,
) -> Vec<f64>
where
    D: Fn(usize) -> f64,
{
    let c = params.a - 0.5 * params.beta2 * params.beta2;
    let w0 = w[start];
    let mut out = Vec::with_capacity(per_tau + 1);
    out.push(z_start);
    // Neumaier-compensated running sum
    let (mut integral, mut carry) = (0.0f64, 0.0f64);
    for k in 0..per_tau {
        let elapsed = k as f64 * h;
        let phi_inv = (-c * elapsed - params.beta2 * (w[start + k] - w0)).exp();
        let y = delayed(k);
        let g = params.beta1 + params.beta3 * signed_pow(y, params.l2);
        let f = params.b * signed_pow(y, params.l1);
        let term = phi_inv * ((f - params.beta2 * g) * h + g * dw[start + k]);
        let sum = integral + term;
        carry += if integral.abs() >= term.abs() {
            (integral - sum) + term
        } else {
            (term - sum) + integral
        };
        integral = sum;

        let elapsed = (k + 1) as f64 * h;
        let phi = (c * elapsed + params.beta2 * (w[start + k + 1] - w0)).exp();
        out.push(phi * (z_start + (integral + carry)));
    }
    out
}

/// `Z` at the fine grid points of `[0, τ]`.
pub fn exact_segment_first(params: &TestProblemParams, path: &BrownianPath) -> Result<Vec<f64>> {
    params.validate()?;
    let per_tau = steps_per_tau(params, path, 1)?;
    let w = path.wiener_values();
    Ok(first_from_values(
        params,
        &w,
        path.increments(),
        path.fine_step(),
        per_tau,
    ))
}

fn first_from_values(
    params: &TestProblemParams,
    w: &[f64],
    dw: &[f64],
    h: f64,
    per_tau: usize,
) -> Vec<f64> {
    let xi = params.xi;
    segment(params, w, dw, h, 0, per_tau, xi.eval(0.0), |k| {
        xi.eval(k as f64 * h - params.tau)
    })
}

/// `Z` at the fine grid points of `[τ, 2τ]`, given the first period on
/// the same grid.
pub fn exact_segment_second(
    params: &TestProblemParams,
    path: &BrownianPath,
    first_segment: &[f64],
) -> Result<Vec<f64>> {
    params.validate()?;
    let per_tau = steps_per_tau(params, path, 2)?;
    if first_segment.len() != per_tau + 1 {
        return Err(SddeError::GridMismatch(format!(
            "first segment has {} points, grid needs {}",
            first_segment.len(),
            per_tau + 1
        )));
    }
    let w = path.wiener_values();
    Ok(second_from_values(
        params,
        &w,
        path.increments(),
        path.fine_step(),
        per_tau,
        first_segment,
    ))
}

fn second_from_values(
    params: &TestProblemParams,
    w: &[f64],
    dw: &[f64],
    h: f64,
    per_tau: usize,
    first: &[f64],
) -> Vec<f64> {
    segment(params, w, dw, h, per_tau, per_tau, first[per_tau], |k| {
        first[k]
    })
}

/// The reference solution on `[0, 2τ]` driven by `path`.
pub fn solve(params: &TestProblemParams, path: &BrownianPath) -> Result<OracleSolution> {
    params.validate()?;
    let per_tau = steps_per_tau(params, path, 2)?;
    let h = path.fine_step();
    let w = path.wiener_values();
    let dw = path.increments();
    let mut values = first_from_values(params, &w, dw, h, per_tau);
    let second = second_from_values(params, &w, dw, h, per_tau, &values);
    values.extend_from_slice(&second[1..]);
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(SddeError::NonFinite {
            step: bad,
            t: bad as f64 * h,
            state: vec![values[bad]],
        });
    }
    Ok(OracleSolution {
        fine_steps: 2 * per_tau,
        values,
        quadrature_step: h,
        path_ref: path.source(),
    })
}

/// Exact solution of the deterministic reduction
/// `dZ = [a Z + b Z(t-τ)^l1] dt` at `t ∈ [0, 2τ]`.
pub fn method_of_steps_ode(params: &TestProblemParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !params.is_deterministic() {
        return Err(SddeError::Invalid(
            "method of steps needs beta1 = beta2 = beta3 = 0".into(),
        ));
    }
    let tau = params.tau;
    if !(0.0..=2.0 * tau).contains(&t) {
        return Err(SddeError::TimeOutOfDomain {
            t,
            lo: 0.0,
            hi: 2.0 * tau,
        });
    }
    let TestProblemParams { a, b, l1, xi, .. } = *params;
    let first = |u: f64| {
        let forcing = integrate_adaptive(
            |s| (-a * s).exp() * b * signed_pow(xi.eval(s - tau), l1),
            0.0,
            u,
            1e-14,
        );
        (a * u).exp() * (xi.eval(0.0) + forcing)
    };
    if t <= tau {
        return Ok(first(t));
    }
    let z_tau = first(tau);
    let forcing = integrate_adaptive(
        |s| (-a * (s - tau)).exp() * b * signed_pow(first(s - tau), l1),
        tau,
        t,
        1e-12,
    );
    Ok((a * (t - tau)).exp() * (z_tau + forcing))
}

const GL_POINTS: usize = 10;

/// Nodes and weights of the `GL_POINTS`-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64); GL_POINTS] {
    use std::sync::OnceLock;
    static RULE: OnceLock<[(f64, f64); GL_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut rule = [(0.0, 0.0); GL_POINTS];
        for (i, slot) in rule.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_n'(x)
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

fn gauss_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    half * gauss_legendre()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Adaptive bisection over Gauss–Legendre panels. A panel is accepted
/// when splitting it changes the estimate by at most `rel_tol` times the
/// magnitude of its halves, or by a fixed floor of `1e-3 · rel_tol` times
/// the first whole-interval estimate (rounding noise in the integrand
/// would otherwise defeat the relative test).
pub(crate) fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        lo: f64,
        hi: f64,
        whole: f64,
        rel_tol: f64,
        floor: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = gauss_panel(f, lo, mid);
        let right = gauss_panel(f, mid, hi);
        let diff = (left + right - whole).abs();
        if depth == 0 || diff <= floor || diff <= rel_tol * (left.abs() + right.abs()) {
            left + right
        } else {
            recurse(f, lo, mid, left, rel_tol, floor, depth - 1)
                + recurse(f, mid, hi, right, rel_tol, floor, depth - 1)
        }
    }
    if hi == lo {
        return 0.0;
    }
    let whole = gauss_panel(&f, lo, hi);
    let floor = 1e-3 * rel_tol * whole.abs();
    recurse(&f, lo, hi, whole, rel_tol, floor, 30)
}

/// RMS over `streams` paths of `Z_k(T) - Z_ref(T)`, where `Z_k` is the
/// oracle evaluated on the path coarsened to `2^k` steps per period and
/// `Z_ref` on `2^reference_exponent` steps per period.
pub fn refinement_study(
    params: &TestProblemParams,
    seed: u64,
    streams: u64,
    exponents: &[u32],
    reference_exponent: u32,
) -> Result<Vec<f64>> {
    if exponents.iter().any(|&e| e >= reference_exponent) {
        return Err(SddeError::config(
            "exponents",
            "every exponent must be below the reference exponent",
        ));
    }
    let fine = 2usize << reference_exponent;
    let diffs: Vec<Vec<f64>> = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let path = BrownianPath::generate(seed, stream, 0.0, 2.0 * params.tau, fine)?;
            let reference = solve(params, &path)?.terminal();
            exponents
                .iter()
                .map(|&e| {
                    let coarse = path.coarsened(1 << (reference_exponent - e))?;
                    let z = solve(params, &coarse)?.terminal();
                    Ok((z - reference).powi(2))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..exponents.len())
        .map(|i| {
            let column: Vec<f64> = diffs.iter().map(|row| row[i]).collect();
            (pairwise_sum(&column) / streams as f64).sqrt()
        })
        .collect())
}

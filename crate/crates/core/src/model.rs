//! Problem description for `dX = β(t, Y, X) dt + α(t, Y, X) dW` with
//! `Y(t) = (X(δ_1(t)), ..., X(δ_k(t)))` and history `X = ξ` on `[-H, 0]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SddeError};

/// Largest grid index `j` with `t0 + j/n <= t`.
///
/// The floor is corrected against the grid points themselves, so every
/// grid point maps to its own index even when `n * (t - t0)` rounds down.
pub fn kappa_index(n: u64, t0: f64, t: f64) -> Result<u64> {
    if n == 0 {
        return Err(SddeError::config("n", "must be positive"));
    }
    if !(t >= t0) || !t.is_finite() {
        return Err(SddeError::TimeOutOfDomain {
            t,
            lo: t0,
            hi: f64::INFINITY,
        });
    }
    let point = |j: u64| t0 + j as f64 / n as f64;
    let mut j = ((t - t0) * n as f64).floor() as u64;
    while point(j + 1) <= t {
        j += 1;
    }
    while j > 0 && point(j) > t {
        j -= 1;
    }
    Ok(j)
}

/// Grid-snap map `κ_n(t) = [n(t - t0)]/n + t0`.
pub fn kappa(n: u64, t0: f64, t: f64) -> Result<f64> {
    let j = kappa_index(n, t0, t)?;
    Ok(t0 + j as f64 / n as f64)
}

/// `sign(z) |z|^l`, the odd extension of `z^l` to negative bases.
#[inline]
pub fn signed_pow(z: f64, l: f64) -> f64 {
    if l == 1.0 {
        z
    } else {
        z.signum() * z.abs().powf(l)
    }
}

/// Uniform grid `{j h}` with `h = τ / n_per_tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_per_tau: u64,
}

impl TimeGrid {
    pub fn new(tau: f64, n_per_tau: u64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SddeError::config("tau", "must be positive and finite"));
        }
        if n_per_tau == 0 || !n_per_tau.is_power_of_two() {
            return Err(SddeError::config(
                "n_per_tau",
                format!("{n_per_tau} is not a positive power of two"),
            ));
        }
        Ok(TimeGrid { tau, n_per_tau })
    }

    pub fn step(&self) -> f64 {
        self.tau / self.n_per_tau as f64
    }

    pub fn time(&self, j: i64) -> f64 {
        j as f64 * self.step()
    }

    /// Index of the largest grid point `<= t`; negative for negative `t`.
    pub fn snap(&self, t: f64) -> i64 {
        let mut j = (t / self.step()).floor() as i64;
        while self.time(j + 1) <= t {
            j += 1;
        }
        while self.time(j) > t {
            j -= 1;
        }
        j
    }
}

/// Closed-form scalar histories used by the test-equation family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialFunction {
    /// `ξ(t) = slope·t + intercept`
    Affine {
        slope: f64,
        intercept: f64,
    },
    Constant {
        value: f64,
    },
}

impl InitialFunction {
    /// `ξ(t) = t + 1`.
    pub const TABLE1: InitialFunction = InitialFunction::Affine {
        slope: 1.0,
        intercept: 1.0,
    };

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            InitialFunction::Affine { slope, intercept } => slope * t + intercept,
            InitialFunction::Constant { value } => value,
        }
    }

    /// Sup-norm of the function over `[-history, 0]`.
    pub fn bound(&self, history: f64) -> f64 {
        self.eval(-history).abs().max(self.eval(0.0).abs())
    }
}

type SegmentFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// The prescribed solution `ξ` on `[-H, 0]`.
#[derive(Clone)]
pub struct InitialSegment {
    history: f64,
    dim: usize,
    bound: f64,
    eval: Arc<SegmentFn>,
}

impl InitialSegment {
    /// `eval(t, out)` writes `ξ(t)` into `out` (length `dim`); `bound` is a
    /// finite sup-norm bound over the domain.
    pub fn new<F>(history: f64, dim: usize, bound: f64, eval: F) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        if !(history > 0.0 && history.is_finite()) {
            return Err(SddeError::config(
                "history",
                "H must be positive and finite",
            ));
        }
        if dim == 0 {
            return Err(SddeError::config("dim", "state dimension must be positive"));
        }
        if !bound.is_finite() {
            return Err(SddeError::config(
                "bound",
                "initial segment must be bounded",
            ));
        }
        Ok(InitialSegment {
            history,
            dim,
            bound,
            eval: Arc::new(eval),
        })
    }

    pub fn scalar(history: f64, xi: InitialFunction) -> Result<Self> {
        Self::new(history, 1, xi.bound(history), move |t, out| {
            out[0] = xi.eval(t)
        })
    }

    pub fn constant(history: f64, value: Vec<f64>) -> Result<Self> {
        let bound = value.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dim = value.len();
        Self::new(history, dim, bound, move |_, out| {
            out.copy_from_slice(&value)
        })
    }

    pub fn history(&self) -> f64 {
        self.history
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn contains(&self, t: f64) -> bool {
        -self.history <= t && t <= 0.0
    }

    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.contains(t) {
            return Err(SddeError::TimeOutOfDomain {
                t,
                lo: -self.history,
                hi: 0.0,
            });
        }
        (self.eval)(t, out);
        Ok(())
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, &mut out)?;
        Ok(out)
    }
}

impl fmt::Debug for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialSegment")
            .field("history", &self.history)
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

/// A delay function `δ(t)`.
#[derive(Clone)]
pub enum DelaySpec {
    /// `δ(t) = t - lag`
    ConstantLag { lag: f64 },
    /// `δ(t) = [t/τ] τ`
    PiecewiseFloor,
    /// Any other delay; lookups use the left grid snap of `δ(t)`.
    Custom {
        name: String,
        delay: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl DelaySpec {
    pub fn constant_lag(lag: f64) -> Result<Self> {
        if !(lag > 0.0 && lag.is_finite()) {
            return Err(SddeError::config("lag", "constant lag must be positive"));
        }
        Ok(DelaySpec::ConstantLag { lag })
    }

    pub fn custom<F>(name: impl Into<String>, delay: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DelaySpec::Custom {
            name: name.into(),
            delay: Arc::new(delay),
        }
    }

    pub fn value(&self, t: f64, tau: f64) -> f64 {
        match self {
            DelaySpec::ConstantLag { lag } => t - lag,
            DelaySpec::PiecewiseFloor => floor_period(t, tau),
            DelaySpec::Custom { delay, .. } => delay(t),
        }
    }
}

impl fmt::Debug for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelaySpec::ConstantLag { lag } => write!(f, "ConstantLag({lag})"),
            DelaySpec::PiecewiseFloor => write!(f, "PiecewiseFloor"),
            DelaySpec::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// `[t/τ] τ`
pub fn floor_period(t: f64, tau: f64) -> f64 {
    (t / tau).floor() * tau
}

/// Drift and diffusion of an SDDE.
///
/// `delayed` holds the `k` delayed states back to back (`k * d` values).
/// Diffusion is written row-major into a `d × m` buffer. Implementations
/// must be pure.
pub trait Coefficients: Send + Sync {
    fn dim_state(&self) -> usize;
    fn dim_noise(&self) -> usize;
    fn drift(&self, t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]);
}

/// Closure-backed [`Coefficients`].
pub struct FnCoefficients<D, S> {
    dim_state: usize,
    dim_noise: usize,
    drift: D,
    diffusion: S,
}

impl<D, S> FnCoefficients<D, S>
where
    D: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    S: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim_state: usize, dim_noise: usize, drift: D, diffusion: S) -> Self {
        FnCoefficients {
            dim_state,
            dim_noise,
            drift,
            diffusion,
        }
    }
}

impl<D, S> Coefficients for FnCoefficients<D, S>
where
    D: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    S: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn dim_state(&self) -> usize {
        self.dim_state
    }
    fn dim_noise(&self) -> usize {
        self.dim_noise
    }
    fn drift(&self, t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]) {
        (self.drift)(t, delayed, x, out)
    }
    fn diffusion(&self, t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, delayed, x, out)
    }
}

/// Analytic conditions a problem is known to satisfy. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition")]
pub enum ConditionTag {
    /// Polynomial growth `|β| + |α| <= G(1 + |y|^l + |x|)`.
    C1 { g: f64, l: f64 },
    /// Local one-sided Lipschitz in `x`.
    C2,
    /// Continuity in `y` uniformly in `x` on compacts.
    C3,
    /// Global one-sided Lipschitz in `x`, polynomial Lipschitz in `y`.
    C4 { c: f64, l1: f64 },
    /// Polynomial Lipschitz drift in `x`.
    C5 { c: f64, l2: f64 },
}

#[derive(Clone)]
pub struct SddeProblem {
    coefficients: Arc<dyn Coefficients>,
    delays: Vec<DelaySpec>,
    initial: InitialSegment,
    period: f64,
    horizon: f64,
    periods: u64,
    conditions: Vec<ConditionTag>,
}

impl SddeProblem {
    /// `horizon` must be an integer multiple of `period`.
    pub fn new(
        coefficients: Arc<dyn Coefficients>,
        delays: Vec<DelaySpec>,
        initial: InitialSegment,
        period: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(SddeError::config("tau", "delay period must be positive"));
        }
        let ratio = horizon / period;
        let periods = ratio.round();
        if !(periods >= 1.0) || (ratio - periods).abs() > 1e-9 * periods {
            return Err(SddeError::config(
                "horizon",
                format!("T={horizon} is not a positive integer multiple of tau={period}"),
            ));
        }
        let d = coefficients.dim_state();
        if d == 0 || coefficients.dim_noise() == 0 {
            return Err(SddeError::config(
                "dim",
                "state and noise dimensions must be positive",
            ));
        }
        if initial.dim() != d {
            return Err(SddeError::config(
                "initial",
                format!("segment has dimension {}, state has {d}", initial.dim()),
            ));
        }
        Ok(SddeProblem {
            coefficients,
            delays,
            initial,
            period,
            horizon: periods * period,
            periods: periods as u64,
            conditions: Vec::new(),
        })
    }

    pub fn with_conditions(mut self, conditions: Vec<ConditionTag>) -> Self {
        self.conditions = conditions;
        self
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    pub fn dim_state(&self) -> usize {
        self.coefficients.dim_state()
    }

    pub fn dim_noise(&self) -> usize {
        self.coefficients.dim_noise()
    }

    pub fn delays(&self) -> &[DelaySpec] {
        &self.delays
    }

    pub fn initial(&self) -> &InitialSegment {
        &self.initial
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `T / τ`
    pub fn periods(&self) -> u64 {
        self.periods
    }

    pub fn conditions(&self) -> &[ConditionTag] {
        &self.conditions
    }
}

impl fmt::Debug for SddeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SddeProblem")
            .field("dim_state", &self.dim_state())
            .field("dim_noise", &self.dim_noise())
            .field("delays", &self.delays)
            .field("initial", &self.initial)
            .field("period", &self.period)
            .field("horizon", &self.horizon)
            .field("conditions", &self.conditions)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `δ(t) > [t/τ] τ`
    AboveBound,
    /// `δ(t) < -H`
    BelowHistory,
    /// `δ(t_j) < δ(t_{j-1})`
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayViolation {
    pub delay: usize,
    pub grid_index: u64,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayValidation {
    pub checked_points: u64,
    pub violation: Option<DelayViolation>,
}

impl DelayValidation {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violation {
            None => Ok(()),
            Some(v) => Err(SddeError::DelayViolation {
                delay: v.delay,
                t: v.t,
                value: v.value,
                bound: v.bound,
            }),
        }
    }
}

/// Checks `-H <= δ_j(t) <= [t/τ] τ` and monotonicity of every delay at the
/// points `t = j / grid_n` in `[0, T]`, stopping at the first violation.
pub fn validate_delays(problem: &SddeProblem, grid_n: u64) -> DelayValidation {
    let last = (problem.horizon() * grid_n as f64 + 1e-9).floor() as u64;
    validate_points(problem, (0..=last).map(|j| (j, j as f64 / grid_n as f64)))
}

pub(crate) fn validate_points<I>(problem: &SddeProblem, points: I) -> DelayValidation
where
    I: IntoIterator<Item = (u64, f64)>,
{
    let tau = problem.period();
    let h_lo = -problem.initial().history();
    let slack = |x: f64| 1e-12 * x.abs().max(1.0);
    let mut previous = vec![f64::NEG_INFINITY; problem.delays().len()];
    let mut checked = 0;
    for (j, t) in points {
        checked += 1;
        let upper = floor_period(t, tau);
        for (k, delay) in problem.delays().iter().enumerate() {
            let value = delay.value(t, tau);
            let violation = |bound, kind| DelayViolation {
                delay: k,
                grid_index: j,
                t,
                value,
                bound,
                kind,
            };
            let found = if !(value <= upper + slack(upper)) {
                Some(violation(upper, ViolationKind::AboveBound))
            } else if value < h_lo - slack(h_lo) {
                Some(violation(h_lo, ViolationKind::BelowHistory))
            } else if value < previous[k] {
                Some(violation(previous[k], ViolationKind::Decreasing))
            } else {
                None
            };
            if found.is_some() {
                return DelayValidation {
                    checked_points: checked,
                    violation: found,
                };
            }
            previous[k] = value;
        }
    }
    DelayValidation {
        checked_points: checked,
        violation: None,
    }
}

/// Parameters of the scalar test family
/// `dZ = [a Z + b Z(t-τ)^l1] dt + [β1 + β2 Z + β3 Z(t-τ)^l2] dW` on `[0, 2τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestProblemParams {
    pub p: f64,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub l1: f64,
    pub l2: f64,
    pub xi: InitialFunction,
}

impl TestProblemParams {
    /// p=2, τ=1, a=-8, b=4, β1=0, β2=1, β3=1, ξ(t)=t+1.
    pub fn table1(l1: f64, l2: f64) -> Self {
        TestProblemParams {
            p: 2.0,
            tau: 1.0,
            a: -8.0,
            b: 4.0,
            beta1: 0.0,
            beta2: 1.0,
            beta3: 1.0,
            l1,
            l2,
            xi: InitialFunction::TABLE1,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.beta1 == 0.0 && self.beta2 == 0.0 && self.beta3 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("l1", self.l1),
            ("l2", self.l2),
            ("p", self.p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SddeError::config(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ] {
            if !v.is_finite() {
                return Err(SddeError::config(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// `a x + b y^l1`
    #[inline]
    pub fn drift(&self, y: f64, x: f64) -> f64 {
        self.a * x + self.b * signed_pow(y, self.l1)
    }

    /// `β1 + β2 x + β3 y^l2`
    #[inline]
    pub fn diffusion(&self, y: f64, x: f64) -> f64 {
        self.beta1 + self.beta2 * x + self.beta3 * signed_pow(y, self.l2)
    }
}

/// Coefficients of the scalar test family.
#[derive(Debug, Clone, Copy)]
pub struct LinearTestCoefficients(pub TestProblemParams);

impl Coefficients for LinearTestCoefficients {
    fn dim_state(&self) -> usize {
        1
    }
    fn dim_noise(&self) -> usize {
        1
    }
    fn drift(&self, _t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = self.0.drift(delayed[0], x[0]);
    }
    fn diffusion(&self, _t: f64, delayed: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = self.0.diffusion(delayed[0], x[0]);
    }
}

/// Scalar problem with lag `τ`, history `[-τ, 0]` and horizon `2τ`.
pub fn build_test_problem(params: &TestProblemParams) -> Result<SddeProblem> {
    params.validate()?;
    let initial = InitialSegment::scalar(params.tau, params.xi)?;
    let mut conditions = vec![ConditionTag::C3];
    if params.l1 == 1.0 && params.l2 == 1.0 {
        conditions.push(ConditionTag::C2);
    }
    SddeProblem::new(
        Arc::new(LinearTestCoefficients(*params)),
        vec![DelaySpec::constant_lag(params.tau)?],
        initial,
        params.tau,
        2.0 * params.tau,
    )
    .map(|p| p.with_conditions(conditions))
}

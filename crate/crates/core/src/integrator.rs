//! Explicit Euler–Maruyama scheme for SDDEs on the grid `h = τ / n_per_tau`.
//!
//! Both the current state and the delayed states enter the coefficients at
//! the left end of each step. Delayed times that fall in `[-H, 0]` are read
//! from the initial segment; later ones are snapped left onto the grid and
//! read from the states computed so far.

use crate::brownian::{BrownianPath, PathRef};
use crate::error::{Result, SddeError};
use crate::model::{DelaySpec, InitialSegment, SddeProblem, TimeGrid};

/// Discrete trajectory `X_n(j h)` for `j = 0..=T/h`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPath {
    grid: TimeGrid,
    dim: usize,
    states: Vec<f64>,
    noise_source: Option<PathRef>,
}

impl EulerPath {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_per_tau(&self) -> u64 {
        self.grid.n_per_tau
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points, `T/h + 1`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.grid.time(j as i64)
    }

    /// States back to back, `dim` values per grid point.
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// The Brownian path the noise was coarsened from, when known.
    pub fn noise_source(&self) -> Option<PathRef> {
        self.noise_source
    }

    /// View of the first `points` grid values.
    pub fn prefix(&self, points: usize) -> PathPrefix<'_> {
        PathPrefix {
            grid: self.grid,
            dim: self.dim,
            states: &self.states[..points.min(self.len()) * self.dim],
        }
    }
}

/// The part of a trajectory computed so far.
#[derive(Debug, Clone, Copy)]
pub struct PathPrefix<'a> {
    pub grid: TimeGrid,
    pub dim: usize,
    pub states: &'a [f64],
}

impl PathPrefix<'_> {
    fn computed_points(&self) -> usize {
        self.states.len() / self.dim
    }
}

/// Value of the discrete solution at a delayed time `t_query`.
///
/// Returns `ξ(t_query)` for `t_query <= 0`, otherwise the state at the
/// largest grid point not after `t_query`.
pub fn lookup_delayed(
    prefix: &PathPrefix<'_>,
    segment: &InitialSegment,
    t_query: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; prefix.dim];
    lookup_into(prefix, segment, t_query, &mut out)?;
    Ok(out)
}

fn lookup_into(
    prefix: &PathPrefix<'_>,
    segment: &InitialSegment,
    t_query: f64,
    out: &mut [f64],
) -> Result<()> {
    if t_query <= 0.0 {
        return segment.evaluate_into(t_query, out);
    }
    let j = prefix.grid.snap(t_query);
    let computed = prefix.computed_points();
    if j < 0 || j as usize >= computed {
        return Err(SddeError::Causality {
            query: t_query,
            computed: prefix.grid.time(computed as i64 - 1),
        });
    }
    let j = j as usize;
    out.copy_from_slice(&prefix.states[j * prefix.dim..(j + 1) * prefix.dim]);
    Ok(())
}

/// Per-step quantities handed to an observer of [`integrate_observed`].
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub index: usize,
    pub t: f64,
    pub h: f64,
    pub state: &'a [f64],
    pub delayed: &'a [f64],
    pub drift: &'a [f64],
    /// Row-major `d × m`.
    pub diffusion: &'a [f64],
}

/// How a delay resolves on a given grid.
enum Resolution {
    /// `δ(t_j) = t_j - offset·h` exactly.
    Offset(i64),
    /// `δ(t_j) = [t_j/τ] τ`, a grid point.
    Floor,
    /// Evaluate `δ` and snap.
    Generic,
}

fn resolve(delay: &DelaySpec, grid: &TimeGrid) -> Resolution {
    match delay {
        DelaySpec::ConstantLag { lag } => {
            let m = (lag / grid.step()).round();
            if m >= 1.0 && (m * grid.step() - lag).abs() <= 1e-12 * lag {
                Resolution::Offset(m as i64)
            } else {
                Resolution::Generic
            }
        }
        DelaySpec::PiecewiseFloor => Resolution::Floor,
        DelaySpec::Custom { .. } => Resolution::Generic,
    }
}

/// Runs the scheme with `noise[c]` holding the increments of the `c`-th
/// Wiener component at step `h = τ / n_per_tau`.
pub fn integrate(problem: &SddeProblem, noise: &[&[f64]], n_per_tau: u64) -> Result<EulerPath> {
    integrate_observed(problem, noise, n_per_tau, |_| {})
}

/// Scalar-noise convenience: coarsens `path` to the step `τ / n_per_tau`.
///
/// `path` must span `[0, T]`.
pub fn integrate_on(
    problem: &SddeProblem,
    path: &BrownianPath,
    n_per_tau: u64,
) -> Result<EulerPath> {
    check_path_span(problem, path)?;
    let steps = (problem.periods() * n_per_tau) as usize;
    let noise = path.increments_at(steps)?;
    let mut out = integrate(problem, &[noise], n_per_tau)?;
    out.noise_source = path.source();
    Ok(out)
}

pub(crate) fn check_path_span(problem: &SddeProblem, path: &BrownianPath) -> Result<()> {
    let tol = 1e-12 * problem.horizon();
    if path.t0().abs() > tol || (path.t1() - problem.horizon()).abs() > tol {
        return Err(SddeError::GridMismatch(format!(
            "path spans [{}, {}], problem needs [0, {}]",
            path.t0(),
            path.t1(),
            problem.horizon()
        )));
    }
    Ok(())
}

/// [`integrate`] with a callback invoked at every step, before the update.
pub fn integrate_observed<O>(
    problem: &SddeProblem,
    noise: &[&[f64]],
    n_per_tau: u64,
    mut observe: O,
) -> Result<EulerPath>
where
    O: FnMut(StepView<'_>),
{
    let grid = TimeGrid::new(problem.period(), n_per_tau)?;
    let d = problem.dim_state();
    let m = problem.dim_noise();
    let steps = (problem.periods() * n_per_tau) as usize;
    if noise.len() != m {
        return Err(SddeError::LengthMismatch {
            expected: m,
            actual: noise.len(),
        });
    }
    for component in noise {
        if component.len() != steps {
            return Err(SddeError::LengthMismatch {
                expected: steps,
                actual: component.len(),
            });
        }
    }
    validate_on_grid(problem, &grid, steps)?;

    let h = grid.step();
    let coefficients = problem.coefficients();
    let segment = problem.initial();
    let resolutions: Vec<Resolution> = problem
        .delays()
        .iter()
        .map(|dl| resolve(dl, &grid))
        .collect();

    let mut states = vec![0.0; (steps + 1) * d];
    segment.evaluate_into(0.0, &mut states[..d])?;
    let mut delayed = vec![0.0; problem.delays().len() * d];
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * m];
    let mut next = vec![0.0; d];

    for j in 0..steps {
        let t = grid.time(j as i64);
        {
            let prefix = PathPrefix {
                grid,
                dim: d,
                states: &states[..(j + 1) * d],
            };
            for (k, (delay, res)) in problem.delays().iter().zip(&resolutions).enumerate() {
                let out = &mut delayed[k * d..(k + 1) * d];
                match *res {
                    Resolution::Offset(offset) => {
                        let i = j as i64 - offset;
                        if i <= 0 {
                            segment.evaluate_into(grid.time(i), out)?;
                        } else {
                            out.copy_from_slice(&states[i as usize * d..(i as usize + 1) * d]);
                        }
                    }
                    Resolution::Floor => {
                        let i = (j as u64 / n_per_tau * n_per_tau) as usize;
                        out.copy_from_slice(&states[i * d..(i + 1) * d]);
                    }
                    Resolution::Generic => {
                        lookup_into(&prefix, segment, delay.value(t, grid.tau), out)?;
                    }
                }
            }
        }
        let x = &states[j * d..(j + 1) * d];
        coefficients.drift(t, &delayed, x, &mut drift);
        coefficients.diffusion(t, &delayed, x, &mut diffusion);
        observe(StepView {
            index: j,
            t,
            h,
            state: x,
            delayed: &delayed,
            drift: &drift,
            diffusion: &diffusion,
        });
        for r in 0..d {
            let mut v = x[r] + drift[r] * h;
            for (c, component) in noise.iter().enumerate() {
                v += diffusion[r * m + c] * component[j];
            }
            next[r] = v;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SddeError::NonFinite {
                step: j + 1,
                t: grid.time(j as i64 + 1),
                state: next.clone(),
            });
        }
        states[(j + 1) * d..(j + 2) * d].copy_from_slice(&next);
    }

    Ok(EulerPath {
        grid,
        dim: d,
        states,
        noise_source: None,
    })
}

fn validate_on_grid(problem: &SddeProblem, grid: &TimeGrid, steps: usize) -> Result<()> {
    crate::model::validate_points(
        problem,
        (0..=steps as u64).map(|j| (j, grid.time(j as i64))),
    )
    .into_result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_test_problem, FnCoefficients, InitialFunction, TestProblemParams};
    use std::sync::Arc;

    fn delay_ode(delay: DelaySpec, xi: InitialFunction) -> SddeProblem {
        // dX = X(δ(t)) dt
        let coeffs = FnCoefficients::new(
            1,
            1,
            |_, y: &[f64], _: &[f64], out: &mut [f64]| out[0] = y[0],
            |_, _: &[f64], _: &[f64], out: &mut [f64]| out[0] = 0.0,
        );
        SddeProblem::new(
            Arc::new(coeffs),
            vec![delay],
            InitialSegment::scalar(1.0, xi).unwrap(),
            1.0,
            2.0,
        )
        .unwrap()
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn lookup_examples() {
        let problem = delay_ode(
            DelaySpec::constant_lag(1.0).unwrap(),
            InitialFunction::TABLE1,
        );
        let noise = zeros(8);
        let path = integrate(&problem, &[&noise], 4).unwrap();
        let seg = problem.initial();

        // δ(0.5) = -0.5 lies in the history
        let full = path.prefix(path.len());
        assert_eq!(lookup_delayed(&full, seg, 0.5 - 1.0).unwrap(), vec![0.5]);
        // floor delay at t=1.5 reads the state at 1.0
        let at = lookup_delayed(&full, seg, crate::model::floor_period(1.5, 1.0)).unwrap();
        assert_eq!(at, path.state(4).to_vec());
        // lag delay at t=1.5 reads the state at 0.5
        assert_eq!(
            lookup_delayed(&full, seg, 0.5).unwrap(),
            path.state(2).to_vec()
        );
        // off-grid queries snap left
        assert_eq!(
            lookup_delayed(&full, seg, 0.6).unwrap(),
            path.state(2).to_vec()
        );

        assert!(matches!(
            lookup_delayed(&full, seg, -1.5),
            Err(SddeError::TimeOutOfDomain { .. })
        ));
        let partial = path.prefix(3);
        assert!(matches!(
            lookup_delayed(&partial, seg, 0.75),
            Err(SddeError::Causality { .. })
        ));
    }

    #[test]
    fn zero_coefficients_keep_the_initial_value() {
        let params = TestProblemParams {
            a: 0.0,
            b: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            ..TestProblemParams::table1(1.0, 1.0)
        };
        let problem = build_test_problem(&params).unwrap();
        let noise: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let path = integrate(&problem, &[&noise], 16).unwrap();
        assert_eq!(path.len(), 33);
        assert!(path.iter().all(|x| x == [1.0]));
    }

    #[test]
    fn delay_ode_hand_recursion() {
        // X' = X(t-1), ξ ≡ 1, h = 1/4:
        // on [0,1] the delayed value is 1, so X(1) = 2 exactly; on [1,2]
        // X(1 + k/4) = X(1 + (k-1)/4) + X((k-1)/4) / 4.
        let mut hand = vec![1.0f64];
        for k in 0..8 {
            let delayed = if k < 4 { 1.0 } else { hand[k - 4] };
            let prev = hand[k];
            hand.push(prev + 0.25 * delayed);
        }
        assert_eq!(hand[4], 2.0);
        assert_eq!(hand[8], 3.375);

        let problem = delay_ode(
            DelaySpec::constant_lag(1.0).unwrap(),
            InitialFunction::Constant { value: 1.0 },
        );
        let noise = zeros(8);
        let path = integrate(&problem, &[&noise], 4).unwrap();
        let got: Vec<f64> = path.iter().map(|x| x[0]).collect();
        assert_eq!(got, hand);
    }

    #[test]
    fn zero_diffusion_matches_deterministic_stepper() {
        let params = TestProblemParams {
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            ..TestProblemParams::table1(0.5, 0.5)
        };
        let problem = build_test_problem(&params).unwrap();
        let path_noise = BrownianPath::generate(5, 0, 0.0, 2.0, 256).unwrap();
        let path = integrate_on(&problem, &path_noise, 64).unwrap();

        let h = 1.0 / 64.0;
        let mut ode = vec![1.0f64];
        for j in 0..128usize {
            let delayed = if j <= 64 {
                params.xi.eval(j as f64 * h - 1.0)
            } else {
                ode[j - 64]
            };
            let x = ode[j];
            ode.push(x + params.drift(delayed, x) * h);
        }
        for (j, x) in path.iter().enumerate() {
            assert_eq!(x[0].to_bits(), ode[j].to_bits(), "step {j}");
        }
    }

    #[test]
    fn additive_noise_is_reproduced() {
        let params = TestProblemParams {
            a: 0.0,
            b: 0.0,
            beta1: 1.0,
            beta2: 0.0,
            beta3: 0.0,
            ..TestProblemParams::table1(1.0, 1.0)
        };
        let problem = build_test_problem(&params).unwrap();
        let bm = BrownianPath::generate(17, 2, 0.0, 2.0, 1 << 10).unwrap();
        let w_end = bm.wiener_value(bm.fine_steps()).unwrap();
        for n in [1u64, 4, 64, 512] {
            let path = integrate_on(&problem, &bm, n).unwrap();
            assert!((path.terminal()[0] - (1.0 + w_end)).abs() <= 1e-14);
            assert_eq!(path.noise_source(), bm.source());
        }
    }

    #[test]
    fn first_step_noise_is_shared_across_resolutions() {
        let bm = BrownianPath::generate(3, 9, 0.0, 2.0, 1 << 8).unwrap();
        let coarse = bm.increments_at(16).unwrap();
        let fine = bm.increments_at(32).unwrap();
        assert_eq!(coarse[0], fine[0] + fine[1]);
    }

    #[test]
    fn floor_delay_reads_period_start() {
        let problem = delay_ode(
            DelaySpec::PiecewiseFloor,
            InitialFunction::Constant { value: 1.0 },
        );
        let noise = zeros(8);
        let path = integrate(&problem, &[&noise], 4).unwrap();
        // X' = X([t]) is piecewise linear: X(1) = 2, X(2) = 4
        assert_eq!(path.state(4), [2.0]);
        assert_eq!(path.terminal(), [4.0]);
    }

    #[test]
    fn custom_delay_snaps_left() {
        // δ(t) = (t - 1) / 2 is admissible for τ = 1 and reaches into [0, 1/2]
        let problem = delay_ode(
            DelaySpec::custom("half", |t| (t - 1.0) / 2.0),
            InitialFunction::Constant { value: 1.0 },
        );
        let noise = zeros(8);
        let path = integrate(&problem, &[&noise], 4).unwrap();
        assert!(path.terminal()[0].is_finite());
        assert_eq!(path.state(4), [2.0]);
        // t=1.75: δ=0.375 snaps to 0.25
        assert_eq!(path.state(8)[0], path.state(7)[0] + 0.25 * path.state(1)[0]);
    }

    #[test]
    fn rejects_bad_noise_and_delays() {
        let problem = build_test_problem(&TestProblemParams::table1(1.0, 1.0)).unwrap();
        let short = zeros(7);
        assert!(matches!(
            integrate(&problem, &[&short], 4),
            Err(SddeError::LengthMismatch {
                expected: 8,
                actual: 7
            })
        ));
        let ok = zeros(8);
        assert!(integrate(&problem, &[&ok, &ok], 4).is_err());
        assert!(integrate(&problem, &[&ok], 3).is_err());

        let bad = delay_ode(DelaySpec::custom("now", |t| t), InitialFunction::TABLE1);
        assert!(matches!(
            integrate(&bad, &[&ok], 4),
            Err(SddeError::DelayViolation { .. })
        ));
        let short_lag = delay_ode(
            DelaySpec::constant_lag(0.5).unwrap(),
            InitialFunction::TABLE1,
        );
        assert!(matches!(
            integrate(&short_lag, &[&ok], 4),
            Err(SddeError::DelayViolation { .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        let coeffs = FnCoefficients::new(
            1,
            1,
            |_, _: &[f64], x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0],
            |_, _: &[f64], _: &[f64], out: &mut [f64]| out[0] = 0.0,
        );
        let problem = SddeProblem::new(
            Arc::new(coeffs),
            vec![],
            InitialSegment::constant(1.0, vec![1e100]).unwrap(),
            1.0,
            2.0,
        )
        .unwrap();
        let noise = zeros(8);
        match integrate(&problem, &[&noise], 4) {
            Err(SddeError::NonFinite { step, .. }) => assert!(step >= 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn vector_state_with_two_noises() {
        // independent components: dX_i = dW_i
        let coeffs = FnCoefficients::new(
            2,
            2,
            |_, _: &[f64], _: &[f64], out: &mut [f64]| out.fill(0.0),
            |_, _: &[f64], _: &[f64], out: &mut [f64]| out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]),
        );
        let problem = SddeProblem::new(
            Arc::new(coeffs),
            vec![DelaySpec::constant_lag(1.0).unwrap()],
            InitialSegment::constant(1.0, vec![0.0, 10.0]).unwrap(),
            1.0,
            2.0,
        )
        .unwrap();
        let w1 = [0.5, -0.25, 1.0, 0.0];
        let w2 = [1.0, 1.0, 1.0, 1.0];
        let path = integrate(&problem, &[&w1, &w2], 2).unwrap();
        assert_eq!(path.dim(), 2);
        assert_eq!(path.terminal(), [1.25, 14.0]);
    }
}

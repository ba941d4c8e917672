//! Euler–Maruyama simulation of stochastic delay differential equations
//! and a Monte Carlo laboratory for measuring strong convergence rates.

pub mod brownian;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod lab;
pub mod model;
pub mod oracle;

pub use brownian::{BrownianPath, PathRef};
pub use error::{Result, SddeError};
pub use integrator::{integrate, integrate_observed, integrate_on, lookup_delayed, EulerPath};
pub use model::{
    build_test_problem, kappa, signed_pow, validate_delays, DelaySpec, InitialFunction,
    InitialSegment, SddeProblem, TestProblemParams,
};

use thiserror::Error;

use crate::fluid::FeasibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid code triple (n={n}, k={k}, d={d}): requires n > d > k > 0")]
    InvalidTriple { n: u32, k: u32, d: u32 },

    #[error("state size must be positive, got {0}")]
    NonPositiveSize(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("control value {0} outside [0, 1]")]
    ControlOutOfRange(f64),

    #[error("step {step} exceeds horizon {horizon}")]
    StepTooLarge { step: f64, horizon: f64 },

    #[error("integration produced a non-finite value at t={time}")]
    NonFiniteState { time: f64 },

    #[error("p0 crosses the switching threshold on {count} disjoint intervals")]
    MultipleIntervals { count: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("analytic pure-activation solution requires c2 = 0 (got {0})")]
    NotPureActivation(f64),

    #[error("trajectory grid does not match the horizon [0, {horizon}]")]
    GridMismatch { horizon: f64 },

    #[error("regeneration is infeasible: X_d(T) under full activation is {x_d_terminal:.4} (target {n_target:.4}), min X_d is {x_d_min:.4} (floor {d_floor:.4})",
        x_d_terminal = .0.x_d_terminal, n_target = .0.n_tight, x_d_min = .0.x_d_min, d_floor = .0.d_tight)]
    Infeasible(Box<FeasibilityReport>),

    #[error("no multiplier reached X_d(T) >= {target} after {doublings} doublings")]
    GammaDiscoveryFailed { target: f64, doublings: u32 },

    #[error("bisection did not converge after {iterations} iterations (gamma={gamma}, X_d(T)={x_d_terminal})")]
    NoConvergence {
        iterations: usize,
        gamma: f64,
        x_d_terminal: f64,
    },
}

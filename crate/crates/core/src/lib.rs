//! Time-constrained optimal regeneration of distributed storage under
//! repair (regenerating) codes.
//!
//! After `r` repair servers fail at once, new clean-slate servers are
//! activated at a controlled rate `ζ·u(t)` and each one downloads `d`
//! repair chunks of size `β` before becoming operational. The goal is to
//! restore all `n` servers by the deadline `T` at minimum activation and
//! transfer cost, without ever dropping below `d` operational servers.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: code parameters (MBR/MSR), system parameters, constraint
//!   margins and restoration-mode classification.
//! - [`fluid`]: the controlled mean-field ODE, its fixed-step integrator and
//!   the feasibility analysis under full activation.
//! - [`pontryagin`]: costate dynamics, the closed form of the switching
//!   multiplier `p₀`, threshold-policy extraction and the analytic solution
//!   for the pure-activation case.
//! - [`optimizer`]: cost functionals and the bisection search over the
//!   terminal multiplier `γ`.
//! - [`mdp_sim`]: exact event-driven simulation of the underlying Markov
//!   model, used to validate the fluid solution.

pub mod error;
pub mod export;
pub mod fluid;
pub mod mdp_sim;
pub mod model;
pub mod numeric;
pub mod optimizer;
pub mod pontryagin;

mod rk4;

pub use error::{Error, Result};
pub use fluid::{
    feasibility_check, integrate, BindingConstraint, ConstantControl, Control, FeasibilityReport,
    FluidTrajectory,
};
pub use model::{
    apply_margins, restoration_mode, CodeSpec, CodeVariant, ConstraintLevels, RestorationMode,
    SystemParams,
};
pub use optimizer::{solve, sweep, SolveResult, SolverOptions};
pub use pontryagin::ThresholdPolicy;

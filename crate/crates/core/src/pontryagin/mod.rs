//! Minimum-principle machinery for the relaxed problem
//! `min J(u) + γ(n − X_d(T))`.
//!
//! On feasible arcs the costate system is triangular and independent of the
//! state, so it is solved once per multiplier `γ`. The control enters the
//! Hamiltonian only through `ζ(c₁ + p₀)u`, hence `u = 1` exactly where
//! `p₀(t) < −c₁`, and the optimal control is a threshold policy.

mod adjoint;
mod closed_form;
mod extrema;
mod policy;
mod pure_activation;

use serde::{Deserialize, Serialize};

pub use adjoint::{adjoint_backward, CostateTrajectory};
pub use closed_form::{g_integral, g_integral_with_method, p0_closed_form, p0_derivative, GIntegralMethod};
pub use extrema::{classify_extrema, ExtremaKind, ExtremaSet};
pub use policy::extract_policy;
pub use pure_activation::{pure_activation_solve, PureActivationCase, PureActivationDiagnostics};

use crate::error::{Error, Result};
use crate::fluid::{Control, RegenDynamics};
use crate::model::{CodeSpec, SystemParams};

/// Bang-bang control with `u = 1` on `(t_on, t_off)` and `0` elsewhere.
/// `t_on == t_off` is the null control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub t_on: f64,
    pub t_off: f64,
}

impl ThresholdPolicy {
    pub fn new(t_on: f64, t_off: f64, horizon: f64) -> Result<Self> {
        if !(0.0 <= t_on && t_on <= t_off && t_off <= horizon) {
            return Err(Error::InvalidParameter {
                name: "policy",
                reason: format!("need 0 <= t_on <= t_off <= T, got ({t_on}, {t_off}) with T={horizon}"),
            });
        }
        Ok(Self { t_on, t_off })
    }

    pub const fn null() -> Self {
        Self {
            t_on: 0.0,
            t_off: 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.t_off <= self.t_on
    }

    /// Total time spent activating.
    pub fn active_time(&self) -> f64 {
        (self.t_off - self.t_on).max(0.0)
    }
}

impl Control for ThresholdPolicy {
    fn value(&self, t: f64) -> f64 {
        if self.t_on < t && t < self.t_off {
            1.0
        } else {
            0.0
        }
    }

    fn switch_epochs(&self) -> Vec<f64> {
        if self.is_null() {
            Vec::new()
        } else {
            vec![self.t_on, self.t_off]
        }
    }
}

/// `H(X, u, p) = p·f(X, u) + c₁ζu + c₂β Σ_{i<d} λ(d − i)X_i` on feasible arcs.
pub fn hamiltonian(
    state: &[f64],
    u: f64,
    costate: &[f64],
    params: &SystemParams,
    code: &CodeSpec,
) -> Result<f64> {
    let dim = code.degree() + 1;
    for len in [state.len(), costate.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: len,
            });
        }
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::ControlOutOfRange(u));
    }
    let dynamics = RegenDynamics::new(params, code);
    let mut f = vec![0.0; dim];
    dynamics.rhs(state, u, &mut f);
    let d = code.degree();
    let coupling: f64 = costate.iter().zip(&f).map(|(p, fk)| p * fk).sum();
    let transfer: f64 = (0..d)
        .map(|i| params.lambda * (d - i) as f64 * state[i])
        .sum::<f64>()
        * params.transfer_cost(code);
    Ok(coupling + params.c1 * params.zeta * u + transfer)
}

//! Analytic threshold policy when transfers are free (`c₂ = 0`).
//!
//! With `z = e^{−λ(T−t)}` the multiplier becomes
//! `p₀ = −γ(1 − z)^d z^{μ/λ}`, so `p₀ < −c₁` exactly when
//! `(1 − z) > (c₁/γ)^{1/d} z^{−μ/(λd)}`. The left side is linear and the
//! right side convex in `z`, so there are at most two crossings, located on
//! either side of the peak `z* = μ/(μ + λd)` of `(1 − z)^d z^{μ/λ}`.

use serde::{Deserialize, Serialize};

use super::ThresholdPolicy;
use crate::error::{Error, Result};
use crate::model::{CodeSpec, SystemParams};
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PureActivationCase {
    /// `t_on = 0 < t_off`.
    SingleSwitch,
    NullControl,
    /// `0 < t_on < t_off`.
    DoubleSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureActivationDiagnostics {
    pub case: PureActivationCase,
    /// Critical failure rate: activation starts at `t = 0` iff `μ < mu_crit`.
    pub mu_crit: f64,
    /// Minimiser of `p₀` over the real line (`None` when `μ = 0`, where the
    /// infimum is approached as `t → −∞`).
    pub t_min: Option<f64>,
    /// Minimum (infimum for `μ = 0`) of `p₀` over the real line.
    pub m_value: f64,
    pub z_on: Option<f64>,
    pub z_off: Option<f64>,
}

pub fn pure_activation_solve(
    params: &SystemParams,
    code: &CodeSpec,
    gamma: f64,
) -> Result<(ThresholdPolicy, PureActivationDiagnostics)> {
    if params.c2 != 0.0 {
        return Err(Error::NotPureActivation(params.c2));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be finite and > 0, got {gamma}"),
        });
    }
    let (mu, lambda, horizon, c1) = (params.mu, params.lambda, params.horizon, params.c1);
    let d = code.degree() as f64;

    let a = (c1 / gamma).powf(1.0 / d);
    let log_arg = (-(-lambda * horizon).exp_m1()).ln() - a.ln();
    let mu_crit = (d / horizon * log_arg).max(0.0);

    let peak = mu / (mu + lambda * d);
    let (t_min, m_value) = if mu > 0.0 {
        let t_min = horizon - (1.0 + d * lambda / mu).ln() / lambda;
        let m = -gamma * (1.0 - peak).powf(d) * peak.powf(mu / lambda);
        (Some(t_min), m)
    } else {
        (None, -gamma)
    };

    let c = mu / (lambda * d);
    let h = |z: f64| (1.0 - z) - a * z.powf(-c);

    let roots = if a == 0.0 {
        Some((0.0, 1.0, f64::NEG_INFINITY))
    } else if h(peak) <= 0.0 {
        None
    } else {
        let z_off = bisect(h, peak, 1.0, 0.0);
        let (z_on, log_z_on) = if mu > 0.0 {
            // Work in w = ln z: the lower root can be far below f64 range.
            let g = |w: f64| -w.exp_m1() - a * (-c * w).exp();
            let top = peak.ln();
            let mut span = 1.0;
            while g(top - span) > 0.0 {
                span *= 2.0;
            }
            let w = bisect(g, top - span, top, 0.0);
            (w.exp(), w)
        } else {
            (0.0, f64::NEG_INFINITY)
        };
        Some((z_on, z_off, log_z_on))
    };

    let Some((z_on, z_off, log_z_on)) = roots else {
        let diag = PureActivationDiagnostics {
            case: PureActivationCase::NullControl,
            mu_crit,
            t_min,
            m_value,
            z_on: None,
            z_off: None,
        };
        return Ok((ThresholdPolicy::null(), diag));
    };

    let t_off = (horizon + z_off.ln() / lambda).min(horizon);
    let t_on_raw = horizon + log_z_on / lambda;
    let (policy, case) = if t_off <= 0.0 {
        (ThresholdPolicy::null(), PureActivationCase::NullControl)
    } else if t_on_raw <= 0.0 {
        (
            ThresholdPolicy::new(0.0, t_off, horizon)?,
            PureActivationCase::SingleSwitch,
        )
    } else {
        (
            ThresholdPolicy::new(t_on_raw, t_off, horizon)?,
            PureActivationCase::DoubleSwitch,
        )
    };
    Ok((
        policy,
        PureActivationDiagnostics {
            case,
            mu_crit,
            t_min,
            m_value,
            z_on: Some(z_on),
            z_off: Some(z_off),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::reference;
    use crate::pontryagin::p0_closed_form;

    #[test]
    fn rejects_transfer_cost() {
        let (code, mut params) = reference();
        params.c2 = 1.0;
        assert!(matches!(
            pure_activation_solve(&params, &code, 10.0),
            Err(Error::NotPureActivation(_))
        ));
    }

    #[test]
    fn no_failures_large_gamma_single_switch() {
        let (code, mut params) = reference();
        params.mu = 0.0;
        let threshold = params.c1 / (1.0 - (-params.lambda * params.horizon).exp()).powi(20);
        let (pol, diag) = pure_activation_solve(&params, &code, 1.5 * threshold).unwrap();
        assert_eq!(diag.case, PureActivationCase::SingleSwitch);
        assert_eq!(pol.t_on, 0.0);
        assert!(pol.t_off > 0.0 && pol.t_off < params.horizon);
        assert!(params.mu <= diag.mu_crit);
    }

    #[test]
    fn small_gamma_is_null() {
        let (code, params) = reference();
        let (pol, diag) = pure_activation_solve(&params, &code, 0.9 * params.c1).unwrap();
        assert_eq!(diag.mu_crit, 0.0);
        assert!(diag.m_value >= -params.c1);
        assert!(pol.is_null());
        assert_eq!(diag.case, PureActivationCase::NullControl);
    }

    #[test]
    fn reference_switch_epoch() {
        let (code, params) = reference();
        let (pol, diag) = pure_activation_solve(&params, &code, 12.7719).unwrap();
        assert_eq!(diag.case, PureActivationCase::SingleSwitch);
        assert!((pol.t_off - 1.22).abs() < 0.01, "{pol:?}");
        let v = p0_closed_form(pol.t_off, &params, &code, 12.7719);
        assert!((v + params.c1).abs() < 1e-9);
    }

    #[test]
    fn double_switch_on_long_horizon() {
        let (code, mut params) = reference();
        params.horizon = 20.0;
        // p₀(0) just above −c₁ while the interior minimum is below it.
        let gamma = 10.1;
        let (pol, diag) = pure_activation_solve(&params, &code, gamma).unwrap();
        assert_eq!(diag.case, PureActivationCase::DoubleSwitch, "{diag:?}");
        assert!(pol.t_on > 0.0 && pol.t_on < diag.t_min.unwrap());
        assert!(pol.t_off > diag.t_min.unwrap());
        for t in [pol.t_on, pol.t_off] {
            assert!((p0_closed_form(t, &params, &code, gamma) + params.c1).abs() < 1e-9);
        }
    }
}

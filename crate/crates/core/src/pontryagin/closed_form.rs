//! Closed form of the switching multiplier, `p₀(t) = −F(t) + G(t)` with
//!
//! ```text
//! F(t) = γ (1 − e^{−λτ})^d e^{−μτ}
//! G(t) = c₂βdλ Σ_{k<d} C(d−1, k) I_k(τ),   I_k(τ) = ∫₀^τ (e^{λv} − 1)^k e^{−(μ+λd)v} dv
//! ```
//!
//! where `τ = T − t`. With `w = 1 − e^{−λv}` the integral becomes an
//! incomplete beta function,
//! `I_k(τ) = B(1 − e^{−λτ}; k + 1, μ/λ + d − k) / λ`, which is used when the
//! alternating binomial expansion cancels badly (short remaining horizons).

use crate::error::{Error, Result};
use crate::model::{CodeSpec, SystemParams};
use crate::numeric::{binomial, CompensatedSum};

/// Fallback threshold: ratio of the absolute term mass to the result of the
/// alternating binomial sum beyond which more than three digits are lost.
const MAX_CANCELLATION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GIntegralMethod {
    /// Binomial expansion, switching to the incomplete beta form on heavy
    /// cancellation.
    Auto,
    BinomialSum,
    IncompleteBeta,
    /// Double-exponential quadrature of the defining integral.
    Quadrature,
}

/// `I_k(τ)` for `0 ≤ k ≤ d − 1`.
pub fn g_integral(k: usize, tau: f64, params: &SystemParams, code: &CodeSpec) -> Result<f64> {
    g_integral_with_method(k, tau, params, code, GIntegralMethod::Auto)
}

pub fn g_integral_with_method(
    k: usize,
    tau: f64,
    params: &SystemParams,
    code: &CodeSpec,
    method: GIntegralMethod,
) -> Result<f64> {
    let d = code.degree();
    if k >= d {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: d - 1,
        });
    }
    if tau <= 0.0 {
        return Ok(0.0);
    }
    match method {
        GIntegralMethod::BinomialSum => Ok(binomial_sum(k, tau, params, d).0),
        GIntegralMethod::IncompleteBeta => Ok(incomplete_beta(k, tau, params, d)),
        GIntegralMethod::Quadrature => Ok(quadrature_integral(k, tau, params, d)),
        GIntegralMethod::Auto => {
            let (value, mass) = binomial_sum(k, tau, params, d);
            if value > 0.0 && mass <= MAX_CANCELLATION * value {
                Ok(value)
            } else {
                Ok(incomplete_beta(k, tau, params, d))
            }
        }
    }
}

/// Returns the compensated sum and the total absolute mass of its terms.
fn binomial_sum(k: usize, tau: f64, params: &SystemParams, d: usize) -> (f64, f64) {
    let mut sum = CompensatedSum::new();
    let mut mass = 0.0;
    for j in 0..=k {
        let rate = params.mu + params.lambda * (d - j) as f64;
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binomial(k as u64, j as u64) * (-(-rate * tau).exp_m1()) / rate;
        mass += term.abs();
        sum.add(term);
    }
    (sum.value(), mass)
}

fn incomplete_beta(k: usize, tau: f64, params: &SystemParams, d: usize) -> f64 {
    let a = (k + 1) as f64;
    let b = params.mu / params.lambda + (d - k) as f64;
    let w = -(-params.lambda * tau).exp_m1();
    let regularized = statrs::function::beta::beta_reg(a, b, w);
    statrs::function::beta::ln_beta(a, b).exp() * regularized / params.lambda
}

fn quadrature_integral(k: usize, tau: f64, params: &SystemParams, d: usize) -> f64 {
    let decay = params.mu + params.lambda * d as f64;
    let lambda = params.lambda;
    let integrand = move |v: f64| -> f64 {
        if k == 0 {
            (-decay * v).exp()
        } else if v <= 0.0 {
            0.0
        } else {
            (k as f64 * (lambda * v).exp_m1().ln() - decay * v).exp()
        }
    };
    // Panels of width ~1/λ keep the double-exponential rule well resolved.
    let panels = (tau * lambda).ceil().clamp(1.0, 10_000.0) as usize;
    let width = tau / panels as f64;
    let mut total = CompensatedSum::new();
    for i in 0..panels {
        let a = i as f64 * width;
        let b = if i + 1 == panels { tau } else { a + width };
        let scale = integrand(0.5 * (a + b)).abs().max(integrand(b).abs()) * width;
        let tol = (scale * 1e-15).max(f64::MIN_POSITIVE);
        total.add(quadrature::double_exponential::integrate(integrand, a, b, tol).integral);
    }
    total.value()
}

/// `G(t) = c₂βdλ Σ C(d−1, k) I_k(T − t)`.
fn transfer_term(tau: f64, params: &SystemParams, code: &CodeSpec) -> f64 {
    let cb = params.transfer_cost(code);
    if cb == 0.0 || tau <= 0.0 {
        return 0.0;
    }
    let d = code.degree();
    let mut sum = CompensatedSum::new();
    for k in 0..d {
        let ik = g_integral(k, tau, params, code).expect("k < d");
        sum.add(binomial((d - 1) as u64, k as u64) * ik);
    }
    cb * d as f64 * params.lambda * sum.value()
}

/// `p₀(t)` in closed form.
pub fn p0_closed_form(t: f64, params: &SystemParams, code: &CodeSpec, gamma: f64) -> f64 {
    let tau = (params.horizon - t).max(0.0);
    let d = code.d as i32;
    let f = gamma * (-(-params.lambda * tau).exp_m1()).powi(d) * (-params.mu * tau).exp();
    -f + transfer_term(tau, params, code)
}

/// `ṗ₀(t)`, using the collapsed derivative of the transfer term
/// `Ġ(t) = −c₂βλd e^{−(λ+μ)τ}`.
pub fn p0_derivative(t: f64, params: &SystemParams, code: &CodeSpec, gamma: f64) -> f64 {
    let tau = (params.horizon - t).max(0.0);
    let (mu, lambda) = (params.mu, params.lambda);
    let d = code.degree() as f64;
    let e = (-lambda * tau).exp();
    let pure = gamma
        * (-mu * tau).exp()
        * (-(-lambda * tau).exp_m1()).powi(code.d as i32 - 1)
        * ((mu + d * lambda) * e - mu);
    pure - params.transfer_cost(code) * lambda * d * (-(lambda + mu) * tau).exp()
}

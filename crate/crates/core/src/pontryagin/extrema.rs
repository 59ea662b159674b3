use serde::{Deserialize, Serialize};

use super::closed_form::{p0_closed_form, p0_derivative};
use crate::model::{CodeSpec, SystemParams};
use crate::numeric::bisect;

const DERIVATIVE_SAMPLES: usize = 4000;

/// Shape of `p₀` on `(0, T)` in terms of its interior extrema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremaKind {
    /// Monotone on `[0, T]`.
    Empty,
    /// Increasing then decreasing.
    MaxOnly,
    /// Decreasing, increasing, decreasing.
    MinMax,
    /// Decreasing then increasing up to `T`. Only occurs without transfer
    /// cost, where `ṗ₀(T) = 0` and the maximum sits on the boundary.
    MinOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub kind: ExtremaKind,
    pub t_min: Option<f64>,
    pub min_value: Option<f64>,
    pub t_max: Option<f64>,
    pub max_value: Option<f64>,
}

/// Locates the interior extrema of `p₀` from sign changes of its analytic
/// derivative.
pub fn classify_extrema(params: &SystemParams, code: &CodeSpec, gamma: f64) -> ExtremaSet {
    let horizon = params.horizon;
    let deriv = |t: f64| p0_derivative(t, params, code, gamma);
    let value = |t: f64| p0_closed_form(t, params, code, gamma);

    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    let mut prev_t = 0.0;
    let mut prev_sign = 0.0f64;
    for i in 1..DERIVATIVE_SAMPLES {
        let t = horizon * i as f64 / DERIVATIVE_SAMPLES as f64;
        let v = deriv(t);
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            if prev_sign != 0.0 && sign != prev_sign {
                let root = bisect(deriv, prev_t, t, 1e-14 * horizon);
                if prev_sign < 0.0 {
                    minima.push(root);
                } else {
                    maxima.push(root);
                }
            }
            prev_sign = sign;
            prev_t = t;
        }
    }

    let t_min = minima.first().copied();
    let t_max = match t_min {
        Some(m) => maxima.iter().copied().find(|&x| x > m),
        None => maxima.first().copied(),
    };
    let kind = match (t_min, t_max) {
        (None, None) => ExtremaKind::Empty,
        (None, Some(_)) => ExtremaKind::MaxOnly,
        (Some(_), Some(_)) => ExtremaKind::MinMax,
        (Some(_), None) => ExtremaKind::MinOnly,
    };
    ExtremaSet {
        kind,
        t_min,
        min_value: t_min.map(value),
        t_max,
        max_value: t_max.map(value),
    }
}

//! Classical fixed-step Runge–Kutta plumbing shared by the state and costate
//! integrators.

use crate::error::{Error, Result};

/// Upper bound on `h · (fastest decay rate)`. Well inside the RK4 stability
/// interval on the negative real axis (|hλ| < 2.78).
pub(crate) const MAX_STEP_RATE: f64 = 0.5;

/// Points closer than this fraction of the horizon are merged.
const MERGE_TOL: f64 = 1e-12;

/// Number of uniform steps covering `[0, horizon]` with spacing at most
/// `step`, refined further when the fastest rate would make the step unstable.
pub(crate) fn uniform_steps(horizon: f64, step: f64, fastest_rate: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter {
            name: "step",
            reason: format!("must be finite and > 0, got {step}"),
        });
    }
    if step > horizon {
        return Err(Error::StepTooLarge { step, horizon });
    }
    let by_step = (horizon / step * (1.0 - 1e-12)).ceil().max(1.0);
    let by_rate = (horizon * fastest_rate / MAX_STEP_RATE).ceil();
    Ok(by_step.max(by_rate) as usize)
}

/// Uniform grid on `[0, horizon]` with every epoch in `(0, horizon)` inserted
/// exactly. A uniform point lying within round-off of an epoch is replaced by
/// the epoch.
pub(crate) fn build_grid(
    horizon: f64,
    step: f64,
    fastest_rate: f64,
    epochs: &[f64],
) -> Result<Vec<f64>> {
    let steps = uniform_steps(horizon, step, fastest_rate)?;
    let h = horizon / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    grid[steps] = horizon;

    let tol = MERGE_TOL * horizon;
    let mut inner: Vec<f64> = epochs
        .iter()
        .copied()
        .filter(|&e| e > tol && e < horizon - tol)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() <= tol);

    if inner.is_empty() {
        return Ok(grid);
    }
    let mut merged = Vec::with_capacity(grid.len() + inner.len());
    let mut epochs = inner.into_iter().peekable();
    for &t in &grid {
        while let Some(&e) = epochs.peek() {
            if e < t - tol {
                merged.push(e);
                epochs.next();
            } else {
                break;
            }
        }
        match epochs.peek() {
            Some(&e) if (e - t).abs() <= tol => {
                merged.push(e);
                epochs.next();
            }
            _ => merged.push(t),
        }
    }
    merged.extend(epochs);
    Ok(merged)
}

/// Scratch space for one RK4 step of a system of fixed dimension.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` by `h` for the autonomous system `ẋ = f(x)`.
    pub(crate) fn step<F: FnMut(&[f64], &mut [f64])>(&mut self, mut f: F, x: &mut [f64], h: f64) {
        let n = x.len();
        f(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

//! Mean-field dynamics of the regeneration process.
//!
//! Compartment `k` of the state holds the (expected) number of replacement
//! servers that have downloaded `k` repair chunks; compartment `d` holds the
//! operational repair servers. Under activation control `u(t) ∈ [0, 1]`:
//!
//! ```text
//! Ẋ₀ = −μ₀X₀ + ζu
//! Ẋ_k = −μ_k X_k + (d − k + 1)λ X_{k−1}     1 ≤ k ≤ d
//! ```
//!
//! with `μ_k = μ + λ(d − k)`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::sig6;
use crate::model::{CodeSpec, ConstraintLevels, SystemParams};
use crate::rk4::{build_grid, Rk4};

/// Values in `(-CLAMP_EPS, 0)` are treated as round-off and stored as zero.
pub const CLAMP_EPS: f64 = 1e-12;

/// Default number of integration steps over the horizon.
pub const DEFAULT_STEPS: f64 = 2000.0;

/// An open-loop activation control on `[0, T]`.
///
/// `switch_epochs` lists every discontinuity so integrators can place grid
/// points on them; the control must be constant between consecutive epochs.
pub trait Control: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn switch_epochs(&self) -> Vec<f64>;
}

/// `u(t) ≡ value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantControl(pub f64);

impl Control for ConstantControl {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn switch_epochs(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// State snapshot at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub time: f64,
    pub x: Vec<f64>,
}

impl FluidState {
    pub fn x_d(&self) -> f64 {
        *self.x.last().expect("state has at least one compartment")
    }
}

/// Precomputed coefficients of the linear dynamics.
#[derive(Debug, Clone)]
pub struct RegenDynamics {
    /// `μ_k` for `k = 0..=d`.
    outflow: Vec<f64>,
    /// `(d − k + 1)λ` for `k = 1..=d`, stored at index `k`.
    inflow: Vec<f64>,
    zeta: f64,
}

impl RegenDynamics {
    pub fn new(params: &SystemParams, code: &CodeSpec) -> Self {
        let d = code.degree();
        let outflow = (0..=d)
            .map(|k| params.mu + params.lambda * (d - k) as f64)
            .collect();
        let inflow = (0..=d)
            .map(|k| if k == 0 { 0.0 } else { (d - k + 1) as f64 * params.lambda })
            .collect();
        Self {
            outflow,
            inflow,
            zeta: params.zeta,
        }
    }

    pub fn dim(&self) -> usize {
        self.outflow.len()
    }

    /// Largest decay rate, `μ₀`.
    pub fn fastest_rate(&self) -> f64 {
        self.outflow[0]
    }

    pub fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]) {
        out[0] = -self.outflow[0] * x[0] + self.zeta * u;
        for k in 1..x.len() {
            out[k] = -self.outflow[k] * x[k] + self.inflow[k] * x[k - 1];
        }
    }
}

fn check_control(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::ControlOutOfRange(u))
    }
}

fn check_dim(x: &[f64], code: &CodeSpec) -> Result<()> {
    let expected = code.degree() + 1;
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        })
    }
}

/// Right-hand side of the controlled dynamics at `state`.
pub fn fluid_rhs(
    state: &[f64],
    u: f64,
    params: &SystemParams,
    code: &CodeSpec,
) -> Result<Vec<f64>> {
    check_control(u)?;
    check_dim(state, code)?;
    let dynamics = RegenDynamics::new(params, code);
    let mut out = vec![0.0; state.len()];
    dynamics.rhs(state, u, &mut out);
    Ok(out)
}

/// A state trajectory on a grid that contains every control switch.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control applied on `(grid[i], grid[i+1])`.
    pub control: Vec<f64>,
    /// Smallest component seen before clamping.
    pub min_unclamped: f64,
}

impl FluidTrajectory {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    pub fn x_d(&self, i: usize) -> f64 {
        *self.states[i].last().expect("non-empty state")
    }

    pub fn x_d_series(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| *s.last().expect("non-empty state"))
    }

    pub fn x_d_terminal(&self) -> f64 {
        self.x_d(self.states.len() - 1)
    }

    pub fn x_d_min(&self) -> f64 {
        self.x_d_series().fold(f64::INFINITY, f64::min)
    }

    pub fn state(&self, i: usize) -> FluidState {
        FluidState {
            time: self.grid[i],
            x: self.states[i].clone(),
        }
    }

    /// State at time `t`, linearly interpolated between grid points.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, self.horizon());
        let i = self.grid.partition_point(|&g| g <= t).saturating_sub(1);
        if i + 1 >= self.grid.len() || self.grid[i] == t {
            return self.states[i.min(self.states.len() - 1)].clone();
        }
        let w = (t - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.states[i]
            .iter()
            .zip(&self.states[i + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Control value reported at grid point `i` (the interval starting there;
    /// the last point repeats the final interval).
    pub fn control_at_point(&self, i: usize) -> f64 {
        self.control[i.min(self.control.len().saturating_sub(1))]
    }

    /// CSV with header `t,x0,...,xd,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.push("u".into());
        writeln!(w, "{}", header.join(","))?;
        for (i, (t, x)) in self.grid.iter().zip(&self.states).enumerate() {
            let mut row = vec![sig6(*t)];
            row.extend(x.iter().map(|&v| sig6(v)));
            row.push(sig6(self.control_at_point(i)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the dynamics over `[0, T]` from `x0` under `control`.
///
/// The grid is uniform with spacing at most `step` (refined if needed for
/// stability) and passes through every switch epoch of the control, so each
/// RK4 step sees a constant control.
pub fn integrate(
    params: &SystemParams,
    code: &CodeSpec,
    control: &dyn Control,
    x0: &[f64],
    step: f64,
) -> Result<FluidTrajectory> {
    check_dim(x0, code)?;
    if x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter {
            name: "x0",
            reason: "initial state must be finite and non-negative".into(),
        });
    }
    let dynamics = RegenDynamics::new(params, code);
    let grid = build_grid(
        params.horizon,
        step,
        dynamics.fastest_rate(),
        &control.switch_epochs(),
    )?;

    let mut rk = Rk4::new(dynamics.dim());
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(grid.len());
    let mut controls = Vec::with_capacity(grid.len() - 1);
    let mut min_unclamped = x.iter().copied().fold(f64::INFINITY, f64::min);
    states.push(x.clone());

    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let u = control.value(0.5 * (a + b));
        check_control(u)?;
        rk.step(|x, dx| dynamics.rhs(x, u, dx), &mut x, b - a);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { time: b });
        }
        min_unclamped = x.iter().copied().fold(min_unclamped, f64::min);
        states.push(
            x.iter()
                .map(|&v| if v < 0.0 && v > -CLAMP_EPS { 0.0 } else { v })
                .collect(),
        );
        controls.push(u);
    }

    Ok(FluidTrajectory {
        grid,
        states,
        control: controls,
        min_unclamped,
    })
}

/// The closed form `X̄_d(t) = e^{−μt}(ζ(1 − e^{−λt})^d + X_d(0))` for full
/// activation as it is usually quoted.
///
/// It does not solve the full-activation dynamics (it is the response to an
/// activation impulse rather than a sustained rate) and is kept as a
/// diagnostic only; [`feasibility_check`] relies on numerical integration.
pub fn uncontrolled_closed_form_paper(
    t: f64,
    params: &SystemParams,
    code: &CodeSpec,
    x_d0: f64,
) -> f64 {
    let d = code.d as i32;
    (-params.mu * t).exp() * (params.zeta * (-(-params.lambda * t).exp_m1()).powi(d) + x_d0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingConstraint {
    TerminalConstraint,
    PathConstraint,
    None,
}

/// Outcome of the full-activation feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `X̄_d(T)` under `u ≡ 1`.
    pub x_d_terminal: f64,
    /// `min X̄_d(t)` over `[0, T]` under `u ≡ 1`.
    pub x_d_min: f64,
    pub n_tight: f64,
    pub d_tight: f64,
    /// Largest failure rate keeping the problem feasible, `min(μ̄_n, μ̄_d)`.
    /// `None` when no non-negative rate is feasible or no upper limit was
    /// found.
    pub mu_bar: Option<f64>,
    pub mu_bar_n: Option<f64>,
    pub mu_bar_d: Option<f64>,
    /// Violated constraint when infeasible (terminal first), otherwise the
    /// constraint that fixes `μ̄`.
    pub binding: BindingConstraint,
    /// Verdict of the closed-form criterion `ζ(1 − e^{−λT})^d ≥ n e^{μT} − X_d(0)`.
    pub closed_form_feasible: bool,
    /// `X̄_d(T)` according to the closed form.
    pub closed_form_x_d_terminal: f64,
}

const MU_DOUBLINGS: u32 = 60;

/// Largest `μ ≥ 0` with `ok(μ)`, assuming `ok` is monotone (true then false).
fn critical_rate<F: FnMut(f64) -> Result<bool>>(mut ok: F) -> Result<Option<f64>> {
    if !ok(0.0)? {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MU_DOUBLINGS {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-10 * hi || mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Feasibility of regeneration from the post-fault state of `params`.
pub fn feasibility_check(
    params: &SystemParams,
    code: &CodeSpec,
    levels: ConstraintLevels,
    step: f64,
) -> Result<FeasibilityReport> {
    feasibility_check_from(params, code, &params.initial_state(code), levels, step)
}

/// Feasibility from an arbitrary initial state: the problem is feasible iff
/// the full-activation trajectory meets both constraints.
pub fn feasibility_check_from(
    params: &SystemParams,
    code: &CodeSpec,
    x0: &[f64],
    levels: ConstraintLevels,
    step: f64,
) -> Result<FeasibilityReport> {
    let full = ConstantControl(1.0);
    let run = |mu: f64| -> Result<FluidTrajectory> {
        let p = SystemParams {
            mu,
            ..params.clone()
        };
        integrate(&p, code, &full, x0, step)
    };

    let traj = run(params.mu)?;
    let x_d_terminal = traj.x_d_terminal();
    let x_d_min = traj.x_d_min();
    let terminal_ok = x_d_terminal >= levels.n;
    let path_ok = x_d_min >= levels.d;
    let feasible = terminal_ok && path_ok;

    let mu_bar_n = critical_rate(|mu| Ok(run(mu)?.x_d_terminal() >= levels.n))?;
    let mu_bar_d = critical_rate(|mu| Ok(run(mu)?.x_d_min() >= levels.d))?;
    let mu_bar = match (mu_bar_n, mu_bar_d) {
        (Some(a), Some(b)) => Some(a.min(b)),
        _ => None,
    };

    let binding = if !terminal_ok {
        BindingConstraint::TerminalConstraint
    } else if !path_ok {
        BindingConstraint::PathConstraint
    } else {
        match (mu_bar_n, mu_bar_d) {
            (Some(a), Some(b)) if a <= b => BindingConstraint::TerminalConstraint,
            (Some(_), Some(_)) => BindingConstraint::PathConstraint,
            _ => BindingConstraint::None,
        }
    };

    let x_d0 = x0[code.degree()];
    let t = params.horizon;
    let d = code.d as i32;
    let closed_lhs = params.zeta * (-(-params.lambda * t).exp_m1()).powi(d);
    let closed_rhs = levels.n * (params.mu * t).exp() - x_d0;

    Ok(FeasibilityReport {
        feasible,
        x_d_terminal,
        x_d_min,
        n_tight: levels.n,
        d_tight: levels.d,
        mu_bar,
        mu_bar_n,
        mu_bar_d,
        binding,
        closed_form_feasible: closed_lhs >= closed_rhs,
        closed_form_x_d_terminal: uncontrolled_closed_form_paper(t, params, code, x_d0),
    })
}

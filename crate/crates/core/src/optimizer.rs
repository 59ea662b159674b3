//! Cost functionals and the multiplier search.
//!
//! The terminal constraint `X_d(T) = n` is relaxed into the penalty
//! `γ(n − X_d(T))`. For a fixed `γ` the relaxed optimum is a threshold
//! policy read off the costate, and `X_d(T)` grows monotonically with `γ`, so
//! the multiplier meeting the constraint is found by bisection.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::sig6;
use crate::fluid::{feasibility_check_from, integrate, FeasibilityReport, FluidTrajectory, DEFAULT_STEPS};
use crate::model::{CodeSpec, ConstraintLevels, SystemParams};
use crate::numeric::CompensatedSum;
use crate::pontryagin::{adjoint_backward, extract_policy, p0_closed_form, ThresholdPolicy};

/// How `p₀(t)` is obtained for a given multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostateMethod {
    /// Backward RK4 integration of the full costate system.
    #[default]
    Adjoint,
    /// Closed-form `−F + G`.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Acceptance band on `|X_d(T) − n|`.
    pub epsilon: f64,
    /// Integration step; `None` means `T / 2000`.
    pub step: Option<f64>,
    pub max_iterations: usize,
    pub max_doublings: u32,
    pub costate: CostateMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            step: None,
            max_iterations: 200,
            max_doublings: 60,
            costate: CostateMethod::Adjoint,
        }
    }
}

impl SolverOptions {
    pub fn step_for(&self, horizon: f64) -> f64 {
        self.step.unwrap_or(horizon / DEFAULT_STEPS)
    }
}

/// Relaxed optimum for one multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEvaluation {
    pub gamma: f64,
    pub policy: ThresholdPolicy,
    pub trajectory: FluidTrajectory,
    pub x_d_terminal: f64,
}

/// Solves the relaxed problem for `gamma` from the post-fault state.
pub fn evaluate_gamma(
    params: &SystemParams,
    code: &CodeSpec,
    gamma: f64,
    step: f64,
) -> Result<GammaEvaluation> {
    evaluate_gamma_from(params, code, &params.initial_state(code), gamma, step, CostateMethod::Adjoint)
}

pub fn evaluate_gamma_from(
    params: &SystemParams,
    code: &CodeSpec,
    x0: &[f64],
    gamma: f64,
    step: f64,
    method: CostateMethod,
) -> Result<GammaEvaluation> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be finite and >= 0, got {gamma}"),
        });
    }
    let policy = match method {
        CostateMethod::Adjoint => {
            let costate = adjoint_backward(params, code, gamma, step)?;
            extract_policy(|t| costate.p0_at(t), params)?
        }
        CostateMethod::ClosedForm => {
            extract_policy(|t| p0_closed_form(t, params, code, gamma), params)?
        }
    };
    let trajectory = integrate(params, code, &policy, x0, step)?;
    Ok(GammaEvaluation {
        gamma,
        policy,
        x_d_terminal: trajectory.x_d_terminal(),
        trajectory,
    })
}

/// `J = ∫₀^T c₁ζu + c₂β Σ_{i<d} λ(d − i)X_i dv`.
///
/// The activation term is exact for a threshold policy; the transfer term
/// uses the trapezoid rule on the trajectory grid.
pub fn running_cost(
    trajectory: &FluidTrajectory,
    policy: &ThresholdPolicy,
    params: &SystemParams,
    code: &CodeSpec,
) -> Result<f64> {
    let horizon = params.horizon;
    let tol = 1e-12 * horizon;
    let grid = &trajectory.grid;
    if grid.len() < 2
        || grid[0].abs() > tol
        || (trajectory.horizon() - horizon).abs() > tol
        || trajectory.states.len() != grid.len()
        || policy.t_off > horizon + tol
    {
        return Err(Error::GridMismatch { horizon });
    }
    let activation = params.c1 * params.zeta * policy.active_time();

    let cb = params.transfer_cost(code);
    if cb == 0.0 {
        return Ok(activation);
    }
    let d = code.degree();
    let rate = |x: &[f64]| -> f64 {
        (0..d)
            .map(|i| params.lambda * (d - i) as f64 * x[i])
            .sum()
    };
    let mut transfers = CompensatedSum::new();
    for (w, s) in grid.windows(2).zip(trajectory.states.windows(2)) {
        transfers.add(0.5 * (w[1] - w[0]) * (rate(&s[0]) + rate(&s[1])));
    }
    Ok(activation + cb * transfers.value())
}

/// `J_γ = J + γ(n − X_d(T))`.
pub fn relaxed_cost(j: f64, gamma: f64, x_d_terminal: f64, n_tight: f64) -> f64 {
    j + gamma * (n_tight - x_d_terminal)
}

/// One multiplier tried by the search, with the bracket it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub gamma: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub x_d_terminal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub gamma_star: f64,
    pub policy: ThresholdPolicy,
    #[serde(skip)]
    pub trajectory: FluidTrajectory,
    pub cost: f64,
    pub relaxed_cost: f64,
    pub x_d_terminal: f64,
    pub iterations: usize,
    pub converged: bool,
    pub path_constraint_ok: bool,
    pub levels: ConstraintLevels,
    pub feasibility: FeasibilityReport,
    /// Multipliers evaluated during doubling and bisection, in order.
    pub history: Vec<BisectionStep>,
}

/// Minimum-cost threshold policy from the post-fault state.
pub fn solve(params: &SystemParams, code: &CodeSpec, options: &SolverOptions) -> Result<SolveResult> {
    params.validate(code)?;
    solve_from(params, code, &params.initial_state(code), options)
}

/// Same as [`solve`] from an arbitrary initial state.
pub fn solve_from(
    params: &SystemParams,
    code: &CodeSpec,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult> {
    if !(options.epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be > 0, got {}", options.epsilon),
        });
    }
    let step = options.step_for(params.horizon);
    let levels = params.levels(code);
    let feasibility = feasibility_check_from(params, code, x0, levels, step)?;
    if !feasibility.feasible {
        return Err(Error::Infeasible(Box::new(feasibility)));
    }

    let n = levels.n;
    let eps = options.epsilon;
    let eval = |gamma: f64| evaluate_gamma_from(params, code, x0, gamma, step, options.costate);
    let mut history = Vec::new();

    let zero = eval(0.0)?;
    history.push(BisectionStep {
        gamma: 0.0,
        gamma_lo: 0.0,
        gamma_hi: 0.0,
        x_d_terminal: zero.x_d_terminal,
    });
    if zero.x_d_terminal >= n - eps {
        return finish(params, code, zero, 0, levels, feasibility, history);
    }

    let mut gamma_hi = 1.0;
    let mut doublings = 0;
    loop {
        let ev = eval(gamma_hi)?;
        history.push(BisectionStep {
            gamma: gamma_hi,
            gamma_lo: 0.0,
            gamma_hi,
            x_d_terminal: ev.x_d_terminal,
        });
        if ev.x_d_terminal >= n {
            break;
        }
        if doublings >= options.max_doublings {
            return Err(Error::GammaDiscoveryFailed {
                target: n,
                doublings,
            });
        }
        gamma_hi *= 2.0;
        doublings += 1;
    }

    let mut gamma_lo = 0.0;
    let mut last = None;
    for iteration in 1..=options.max_iterations {
        let gamma = 0.5 * (gamma_lo + gamma_hi);
        let ev = eval(gamma)?;
        history.push(BisectionStep {
            gamma,
            gamma_lo,
            gamma_hi,
            x_d_terminal: ev.x_d_terminal,
        });
        if (ev.x_d_terminal - n).abs() <= eps {
            return finish(params, code, ev, iteration, levels, feasibility, history);
        }
        if ev.x_d_terminal > n {
            gamma_hi = gamma;
        } else {
            gamma_lo = gamma;
        }
        last = Some((gamma, ev.x_d_terminal));
    }
    let (gamma, x_d_terminal) = last.unwrap_or((gamma_hi, f64::NAN));
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        gamma,
        x_d_terminal,
    })
}

fn finish(
    params: &SystemParams,
    code: &CodeSpec,
    ev: GammaEvaluation,
    iterations: usize,
    levels: ConstraintLevels,
    feasibility: FeasibilityReport,
    history: Vec<BisectionStep>,
) -> Result<SolveResult> {
    let cost = running_cost(&ev.trajectory, &ev.policy, params, code)?;
    Ok(SolveResult {
        gamma_star: ev.gamma,
        policy: ev.policy,
        cost,
        relaxed_cost: relaxed_cost(cost, ev.gamma, ev.x_d_terminal, levels.n),
        x_d_terminal: ev.x_d_terminal,
        iterations,
        converged: true,
        path_constraint_ok: ev.trajectory.x_d_min() >= levels.d,
        trajectory: ev.trajectory,
        levels,
        feasibility,
        history,
    })
}

/// One cell of a cost sweep. `c2` is in dollars per gigabyte.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub c1: f64,
    pub c2: f64,
    pub outcome: Result<SolveResult>,
}

/// Solves every `(c1, c2)` combination, row-major in `c1`. Cells run in
/// parallel; a failing cell does not stop the others.
pub fn sweep(
    params_base: &SystemParams,
    code: &CodeSpec,
    c1_list: &[f64],
    c2_list: &[f64],
    options: &SolverOptions,
) -> Result<Vec<SweepCell>> {
    if c1_list.is_empty() || c2_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "cost lists must be non-empty".into(),
        });
    }
    let cells: Vec<(f64, f64)> = c1_list
        .iter()
        .flat_map(|&c1| c2_list.iter().map(move |&c2| (c1, c2)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(c1, c2)| {
            let params = SystemParams {
                c1,
                c2,
                ..params_base.clone()
            };
            SweepCell {
                c1,
                c2,
                outcome: solve(&params, code, options),
            }
        })
        .collect())
}

/// CSV `c1,c2,J_star,gamma_star,t_on,t_off,iterations,converged`. Failed
/// cells leave the numeric fields empty.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], mut w: W) -> io::Result<()> {
    writeln!(w, "c1,c2,J_star,gamma_star,t_on,t_off,iterations,converged")?;
    for cell in cells {
        match &cell.outcome {
            Ok(r) => writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                sig6(cell.c1),
                sig6(cell.c2),
                sig6(r.cost),
                sig6(r.gamma_star),
                sig6(r.policy.t_on),
                sig6(r.policy.t_off),
                r.iterations,
                r.converged
            )?,
            Err(_) => writeln!(w, "{},{},,,,,,false", sig6(cell.c1), sig6(cell.c2))?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::ConstantControl;
    use crate::model::fixtures::reference;

    #[test]
    fn relaxed_cost_examples() {
        assert_eq!(relaxed_cost(12.2, 3.0, 50.0, 50.0), 12.2);
        assert_eq!(relaxed_cost(0.0, 1.0, 39.0, 50.0), 11.0);
        assert_eq!(relaxed_cost(122.5, 12.8, 50.0, 50.0), 122.5);
    }

    #[test]
    fn activation_cost_is_exact() {
        let (code, mut params) = reference();
        let step = params.horizon / 2000.0;
        let x0 = params.initial_state(&code);
        let policy = ThresholdPolicy::new(0.0, 1.22, params.horizon).unwrap();
        let tr = integrate(&params, &code, &policy, &x0, step).unwrap();
        params.c1 = 1.0;
        assert!((running_cost(&tr, &policy, &params, &code).unwrap() - 12.2).abs() < 1e-12);
        params.c1 = 20.0;
        assert!((running_cost(&tr, &policy, &params, &code).unwrap() - 244.0).abs() < 1e-12);
    }

    #[test]
    fn null_policy_costs_nothing() {
        let (code, mut params) = reference();
        params.c2 = 100.0;
        let x0 = params.initial_state(&code);
        let tr = integrate(&params, &code, &ConstantControl(0.0), &x0, 0.01).unwrap();
        let j = running_cost(&tr, &ThresholdPolicy::null(), &params, &code).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let (code, params) = reference();
        let x0 = params.initial_state(&code);
        let short = SystemParams {
            horizon: 2.0,
            ..params.clone()
        };
        let tr = integrate(&short, &code, &ConstantControl(0.0), &x0, 0.01).unwrap();
        assert!(matches!(
            running_cost(&tr, &ThresholdPolicy::null(), &params, &code),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn zero_multiplier_is_uncontrolled_decay() {
        let (code, params) = reference();
        let ev = evaluate_gamma(&params, &code, 0.0, params.horizon / 2000.0).unwrap();
        assert!(ev.policy.is_null());
        let want = 39.0 * (-params.mu * params.horizon).exp();
        assert!((ev.x_d_terminal - want).abs() < 1e-10);
    }

    #[test]
    fn huge_multiplier_activates_throughout() {
        let (code, params) = reference();
        let ev = evaluate_gamma(&params, &code, 1e9, params.horizon / 2000.0).unwrap();
        assert_eq!(ev.policy.t_on, 0.0);
        assert!(ev.policy.t_off > 0.9 * params.horizon);
        assert!(ev.x_d_terminal >= 50.0);
    }

    #[test]
    fn reference_solve() {
        let (code, params) = reference();
        let r = solve(&params, &code, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x_d_terminal - 50.0).abs() <= 0.05);
        assert!(r.gamma_star > 12.7 && r.gamma_star < 12.9, "{}", r.gamma_star);
        assert!((r.cost - 122.5).abs() < 0.05 * 122.5, "{}", r.cost);
        assert!(r.path_constraint_ok);
        assert_eq!(r.policy.t_on, 0.0);
    }

    #[test]
    fn nothing_to_restore() {
        let (code, mut params) = reference();
        params.mu = 0.0;
        params.x_d0 = 50.0;
        let r = solve(&params, &code, &SolverOptions::default()).unwrap();
        assert_eq!(r.gamma_star, 0.0);
        assert!(r.policy.is_null());
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn infeasible_is_reported() {
        let (code, mut params) = reference();
        params.zeta = 1.0;
        assert!(matches!(
            solve(&params, &code, &SolverOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let (code, params) = reference();
        let opts = SolverOptions {
            epsilon: 0.0,
            ..SolverOptions::default()
        };
        assert!(solve(&params, &code, &opts).is_err());
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let (code, params) = reference();
        let opts = SolverOptions {
            max_iterations: 2,
            ..SolverOptions::default()
        };
        assert!(matches!(
            solve(&params, &code, &opts),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn sweep_keeps_order_and_failures() {
        let (code, mut params) = reference();
        params.zeta = 1.0;
        let cells = sweep(&params, &code, &[1.0, 2.0], &[0.0], &SolverOptions::default()).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[0].c1, cells[1].c1), (1.0, 2.0));
        assert!(cells.iter().all(|c| c.outcome.is_err()));
        let mut buf = Vec::new();
        write_sweep_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,0,,,,,,false");
        assert!(sweep(&params, &code, &[], &[0.0], &SolverOptions::default()).is_err());
    }
}

//! Acceptance suite for the reference scenario. Prints one line per
//! criterion and exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::{adaptive_simpson, composite_simpson, reference, step, with_costs};
use regen_core::fluid::feasibility_check;
use regen_core::mdp_sim::{monte_carlo, SimConfig};
use regen_core::optimizer::{evaluate_gamma, running_cost, sweep, SolverOptions};
use regen_core::pontryagin::{
    adjoint_backward, extract_policy, g_integral, p0_closed_form, pure_activation_solve,
    PureActivationCase,
};
use regen_core::{integrate, solve, ThresholdPolicy};

const C1: [f64; 3] = [1.0, 10.0, 20.0];
const C2: [f64; 3] = [0.0, 10.0, 100.0];

const J_TABLE: [[f64; 3]; 3] = [
    [12.2, 169.0, 1580.6],
    [122.5, 279.1, 1691.9],
    [244.9, 401.3, 1812.9],
];

const GAMMA_TABLE: [[f64; 3]; 3] = [
    [1.2766, 17.5851, 164.0627],
    [12.8000, 29.1024, 175.8790],
    [25.5990, 41.7977, 188.2813],
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct SweepTable {
    cost: [[f64; 3]; 3],
    gamma: [[f64; 3]; 3],
    t_on: [[f64; 3]; 3],
    t_off: [[f64; 3]; 3],
    elapsed: f64,
}

fn run_sweep() -> Result<SweepTable, String> {
    let (code, params) = reference();
    let start = Instant::now();
    let cells = sweep(&params, &code, &C1, &C2, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut t = SweepTable {
        cost: [[0.0; 3]; 3],
        gamma: [[0.0; 3]; 3],
        t_on: [[0.0; 3]; 3],
        t_off: [[0.0; 3]; 3],
        elapsed,
    };
    for (idx, cell) in cells.iter().enumerate() {
        let (i, j) = (idx / 3, idx % 3);
        let r = cell
            .outcome
            .as_ref()
            .map_err(|e| format!("cell c1={} c2={}: {e}", cell.c1, cell.c2))?;
        t.cost[i][j] = r.cost;
        t.gamma[i][j] = r.gamma_star;
        t.t_on[i][j] = r.policy.t_on;
        t.t_off[i][j] = r.policy.t_off;
    }
    Ok(t)
}

fn criterion_cost_table(t: &SweepTable) -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let e = rel(t.cost[i][j], J_TABLE[i][j]);
            worst = worst.max(e);
            cells.push(format!("{:.1}", t.cost[i][j]));
        }
    }
    Outcome {
        pass: worst <= 0.05 && t.elapsed < 10.0,
        detail: format!(
            "max rel err {:.4} (tol 0.05), sweep {:.2}s, J = [{}]",
            worst,
            t.elapsed,
            cells.join(", ")
        ),
    }
}

fn criterion_gamma_table(t: &SweepTable) -> Outcome {
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max(rel(t.gamma[i][j], GAMMA_TABLE[i][j]));
            cells.push(format!("{:.4}", t.gamma[i][j]));
        }
    }
    Outcome {
        pass: worst <= 0.10,
        detail: format!("max rel err {:.4} (tol 0.10), gamma = [{}]", worst, cells.join(", ")),
    }
}

fn criterion_switching_epochs(t: &SweepTable) -> Outcome {
    // Row c1 = 10; columns c2 = 0 and c2 = 100.
    let checks = [(0usize, 12.75, 12.85), (2usize, 175.5, 176.2)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, lo, hi) in checks {
        let (on, off, g) = (t.t_on[1][j], t.t_off[1][j], t.gamma[1][j]);
        pass &= on == 0.0 && (off - 1.22).abs() <= 0.05 && (lo..=hi).contains(&g);
        parts.push(format!("c2={}: t_on={on} t_off={off:.4} gamma={g:.4}", C2[j]));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_closed_forms() -> Outcome {
    let (code, base) = reference();
    let mut worst_p0 = 0.0f64;
    let mut zero_ok = true;
    for &c2 in &[0.0, 100.0] {
        let params = with_costs(&base, 10.0, c2);
        for &gamma in &[0.0, 1.0, 12.77, 175.86] {
            let costate = adjoint_backward(&params, &code, gamma, params.horizon / 4000.0).unwrap();
            let mut scale = 0.0f64;
            let mut diff = 0.0f64;
            for (t, p) in costate.grid.iter().zip(&costate.p) {
                let cf = p0_closed_form(*t, &params, &code, gamma);
                scale = scale.max(cf.abs());
                diff = diff.max((cf - p[0]).abs());
            }
            if scale == 0.0 {
                zero_ok &= diff == 0.0;
            } else {
                worst_p0 = worst_p0.max(diff / scale);
            }
        }
    }

    let params = with_costs(&base, 10.0, 100.0);
    let d = code.degree();
    let decay = params.mu + params.lambda * d as f64;
    let mut worst_g = 0.0f64;
    for k in 0..d {
        for &tau in &[0.01, 0.1, 0.5, 1.0, 2.0, 3.5] {
            let f = |v: f64| ((params.lambda * v).exp() - 1.0).powi(k as i32) * (-decay * v).exp();
            let rough = composite_simpson(&f, 0.0, tau, 256);
            let oracle = adaptive_simpson(&f, 0.0, tau, 1e-12 * rough.abs());
            let got = g_integral(k, tau, &params, &code).unwrap();
            worst_g = worst_g.max(rel(got, oracle));
        }
    }
    Outcome {
        pass: zero_ok && worst_p0 <= 1e-6 && worst_g <= 1e-9,
        detail: format!(
            "p0 closed form vs adjoint max rel dev {worst_p0:.2e} (tol 1e-6); \
             g_integral vs adaptive Simpson max rel dev {worst_g:.2e} (tol 1e-9)"
        ),
    }
}

fn criterion_pure_activation() -> Outcome {
    let (code, base) = reference();
    // A longer horizon places the minimiser of p₀ inside [0, T], so all three
    // cases occur.
    let params = regen_core::SystemParams {
        horizon: 20.0,
        ..with_costs(&base, 10.0, 0.0)
    };
    let d = code.degree() as f64;
    let (mu, lambda, horizon) = (params.mu, params.lambda, params.horizon);
    let at_origin = (1.0 - (-lambda * horizon).exp()).powf(d) * (-mu * horizon).exp();
    let r = mu / (mu + lambda * d);
    let deepest = (1.0 - r).powf(d) * r.powf(mu / lambda);
    // γ below c₁/deepest: no activation; between: two switches; above c₁/at_origin: one.
    let g_null = params.c1 / deepest;
    let g_single = params.c1 / at_origin;

    let mut grid = Vec::new();
    for i in 0..6 {
        grid.push(g_null * (0.2 + 0.13 * i as f64));
    }
    for i in 1..=7 {
        grid.push(g_null + (g_single - g_null) * i as f64 / 8.0);
    }
    for i in 0..7 {
        grid.push(g_single * 1.05f64.powi(1 + 3 * i));
    }

    let step = horizon / 4000.0;
    let tol = 1e-4 * horizon;
    let mut worst = 0.0f64;
    let mut seen = [false; 3];
    let mut pass = grid.len() == 20;
    for &gamma in &grid {
        let (analytic, diag) = pure_activation_solve(&params, &code, gamma).unwrap();
        seen[match diag.case {
            PureActivationCase::NullControl => 0,
            PureActivationCase::DoubleSwitch => 1,
            PureActivationCase::SingleSwitch => 2,
        }] = true;
        let costate = adjoint_backward(&params, &code, gamma, step).unwrap();
        let numeric = extract_policy(|t| costate.p0_at(t), &params).unwrap();
        if analytic.is_null() || numeric.is_null() {
            pass &= analytic.is_null() && numeric.is_null();
            continue;
        }
        worst = worst
            .max((analytic.t_on - numeric.t_on).abs())
            .max((analytic.t_off - numeric.t_off).abs());
    }
    pass &= worst <= tol && seen.iter().all(|&s| s);
    Outcome {
        pass,
        detail: format!(
            "20 multipliers, cases seen null/double/single = {seen:?}, max epoch gap {worst:.2e} (tol {tol:.1e})"
        ),
    }
}

fn criterion_monotonicity() -> Outcome {
    let (code, params) = reference();
    let evs: Vec<_> = (0..=8)
        .map(|i| evaluate_gamma(&params, &code, 0.1 * 2f64.powi(i), step(&params)).unwrap())
        .collect();
    let mut violations = 0;
    for w in evs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        // A null policy has no meaningful epochs; it only constrains X_d(T).
        if !a.policy.is_null() && !b.policy.is_null() {
            violations += usize::from(b.policy.t_off < a.policy.t_off);
            violations += usize::from(b.policy.t_on > a.policy.t_on);
        }
        if !a.policy.is_null() && b.policy.is_null() {
            violations += 1;
        }
        violations += usize::from(b.x_d_terminal < a.x_d_terminal);
    }
    let offs: Vec<String> = evs.iter().map(|e| format!("{:.3}", e.policy.t_off)).collect();
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations over 9 multipliers; t_off = [{}]", offs.join(", ")),
    }
}

fn criterion_feasibility() -> Outcome {
    let (code, params) = reference();
    let r = feasibility_check(&params, &code, params.levels(&code), step(&params)).unwrap();
    Outcome {
        pass: r.feasible && r.x_d_terminal >= 50.0 && r.closed_form_feasible != r.feasible,
        detail: format!(
            "feasible={} X_d(T)={:.3}; closed-form diagnostic feasible={} (X_d(T)={:.3})",
            r.feasible, r.x_d_terminal, r.closed_form_feasible, r.closed_form_x_d_terminal
        ),
    }
}

fn criterion_stochastic_consistency() -> Outcome {
    let (code, params) = reference();
    let start = Instant::now();
    let solved = solve(&params, &code, &SolverOptions::default()).unwrap();
    let config = SimConfig {
        seed: 20_240_601,
        runs: 10_000,
        operational_failures: true,
        scale: 25.0,
        ..SimConfig::default()
    };
    let stats = monte_carlo(&params, &code, &solved.policy, &config).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let xd = stats.mean_terminal_xd;
    let cost = stats.mean_cost;
    let xd_z = (xd.mean - solved.x_d_terminal).abs() / xd.std_error;
    let cost_z = (cost.mean - solved.cost).abs() / cost.std_error;
    Outcome {
        pass: xd_z <= 3.0 && cost_z <= 3.0 && elapsed < 120.0,
        detail: format!(
            "X_d(T)/s {:.4} ± {:.4} vs fluid {:.4} ({xd_z:.2} SE); cost/s {:.3} ± {:.3} vs fluid {:.3} ({cost_z:.2} SE); {elapsed:.1}s",
            xd.mean, xd.std_error, solved.x_d_terminal, cost.mean, cost.std_error, solved.cost
        ),
    }
}

fn criterion_local_optimality() -> Outcome {
    let (code, params) = reference();
    let opts = SolverOptions::default();
    let solved = solve(&params, &code, &opts).unwrap();
    let x0 = params.initial_state(&code);
    let delta = 0.035;
    let probe = |t_off: f64| {
        let policy = ThresholdPolicy::new(solved.policy.t_on, t_off, params.horizon).unwrap();
        let tr = integrate(&params, &code, &policy, &x0, step(&params)).unwrap();
        let j = running_cost(&tr, &policy, &params, &code).unwrap();
        (j, tr.x_d_terminal())
    };
    let (j_plus, _) = probe(solved.policy.t_off + delta);
    let (_, xd_minus) = probe(solved.policy.t_off - delta);
    let later_costs_more = j_plus > solved.cost;
    let earlier_misses = (xd_minus - solved.levels.n).abs() > opts.epsilon;
    Outcome {
        pass: later_costs_more && earlier_misses,
        detail: format!(
            "J* {:.3}, J(t_off+δ) {:.3}; X_d(T) at t_off-δ {:.4} (band ±{})",
            solved.cost, j_plus, xd_minus, opts.epsilon
        ),
    }
}

fn main() {
    let sweep_table = run_sweep();
    let from_sweep = |f: fn(&SweepTable) -> Outcome| match &sweep_table {
        Ok(t) => f(t),
        Err(e) => Outcome {
            pass: false,
            detail: format!("sweep failed: {e}"),
        },
    };

    let timed = |f: fn() -> Outcome| {
        let start = Instant::now();
        let mut o = f();
        o.detail.push_str(&format!(" [{:.1}s]", start.elapsed().as_secs_f64()));
        o
    };
    let results = [
        ("1 cost table", from_sweep(criterion_cost_table)),
        ("2 multiplier table", from_sweep(criterion_gamma_table)),
        ("3 switching epochs", from_sweep(criterion_switching_epochs)),
        ("4 closed-form oracles", timed(criterion_closed_forms)),
        ("5 pure-activation equivalence", timed(criterion_pure_activation)),
        ("6 monotonicity in gamma", timed(criterion_monotonicity)),
        ("7 feasibility", timed(criterion_feasibility)),
        ("8 fluid-stochastic consistency", timed(criterion_stochastic_consistency)),
        ("9 local optimality probe", timed(criterion_local_optimality)),
    ];

    let mut failed = 0;
    for (name, outcome) in &results {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} | {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

mod common;

use common::{reference, step};
use proptest::prelude::*;
use regen_core::fluid::{feasibility_check, integrate, ConstantControl, Control};
use regen_core::ThresholdPolicy;

/// Zero control that still reports switch epochs, so its grid matches a
/// threshold policy with the same epochs.
struct Silent(Vec<f64>);

impl Control for Silent {
    fn value(&self, _t: f64) -> f64 {
        0.0
    }
    fn switch_epochs(&self) -> Vec<f64> {
        self.0.clone()
    }
}

fn policy_strategy(horizon: f64) -> impl Strategy<Value = ThresholdPolicy> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(move |(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        ThresholdPolicy::new(lo * horizon, hi * horizon, horizon).unwrap()
    })
}

#[test]
fn rk4_is_fourth_order_on_reference() {
    let (code, params) = reference();
    let x0 = params.initial_state(&code);
    let policy = ThresholdPolicy::new(0.0, 1.22, params.horizon).unwrap();
    let run = |n: f64| {
        integrate(&params, &code, &policy, &x0, params.horizon / n)
            .unwrap()
            .x_d_terminal()
    };
    let (a, b, c) = (run(300.0), run(600.0), run(1200.0));
    // Coarser steps would be refined by the stability guard (hμ₀ ≤ 0.5).
    let ratio = (a - b) / (b - c);
    assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn terminal_level_decreases_with_failure_rate() {
    let (code, params) = reference();
    let mut last = f64::INFINITY;
    for i in 0..12 {
        let mut p = params.clone();
        p.mu = 0.002 * i as f64;
        let r = feasibility_check(&p, &code, p.levels(&code), step(&p)).unwrap();
        assert!(r.x_d_terminal <= last, "mu={}: {} > {last}", p.mu, r.x_d_terminal);
        last = r.x_d_terminal;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectories_stay_nonnegative(
        mu in 0.0..0.5f64,
        zeta in 0.0..50.0f64,
        x_d0 in 20.0..50.0f64,
        frac in (0.0..1.0f64, 0.0..1.0f64),
    ) {
        let (code, mut params) = reference();
        params.mu = mu;
        params.zeta = zeta;
        params.x_d0 = x_d0;
        let (lo, hi) = if frac.0 <= frac.1 { frac } else { (frac.1, frac.0) };
        let policy = ThresholdPolicy::new(lo * params.horizon, hi * params.horizon, params.horizon).unwrap();
        let tr = integrate(&params, &code, &policy, &params.initial_state(&code), step(&params)).unwrap();
        prop_assert!(tr.min_unclamped >= -1e-9);
    }

    #[test]
    fn full_activation_dominates(policy in policy_strategy(3.5), mu in 0.0..0.1f64) {
        let (code, mut params) = reference();
        params.mu = mu;
        let x0 = params.initial_state(&code);
        let tr = integrate(&params, &code, &policy, &x0, step(&params)).unwrap();
        let full = integrate(&params, &code, &ConstantControl(1.0), &x0, step(&params)).unwrap();
        for (t, x) in tr.grid.iter().zip(&tr.states) {
            let bound = full.state_at(*t);
            // Linear interpolation of the bound only loosens it between nodes
            // by the local curvature; a relative slack covers that.
            prop_assert!(x[20] <= bound[20] + 1e-6 * bound[20], "t={t}: {} > {}", x[20], bound[20]);
        }
    }

    #[test]
    fn response_is_linear_in_initial_state(
        policy in policy_strategy(3.5),
        a in proptest::collection::vec(0.0..5.0f64, 21),
        b in proptest::collection::vec(0.0..5.0f64, 21),
    ) {
        let (code, params) = reference();
        let h = step(&params);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let both = integrate(&params, &code, &policy, &sum, h).unwrap();
        let forced = integrate(&params, &code, &policy, &a, h).unwrap();
        let free = integrate(&params, &code, &Silent(policy.switch_epochs()), &b, h).unwrap();
        prop_assert_eq!(both.grid.len(), free.grid.len());
        for i in 0..both.grid.len() {
            for k in 0..21 {
                let lhs = both.states[i][k];
                let rhs = forced.states[i][k] + free.states[i][k];
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }
}

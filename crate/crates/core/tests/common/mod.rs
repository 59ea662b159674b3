#![allow(dead_code)]

use regen_core::{CodeSpec, CodeVariant, SystemParams};

/// MBR(50, 10, 20), 10 GB state, 1 Gbit/s links, 11 failed servers.
pub fn reference() -> (CodeSpec, SystemParams) {
    let code = CodeSpec::new(CodeVariant::Mbr, 50, 10, 20, 10.0).unwrap();
    let params = SystemParams {
        mu: 0.001,
        lambda: 1.0 / code.beta_gbit(),
        zeta: 10.0,
        c1: 10.0,
        c2: 0.0,
        horizon: 3.5,
        x_d0: 39.0,
        eps1: 0.0,
        eps2: 0.0,
    };
    (code, params)
}

pub fn with_costs(params: &SystemParams, c1: f64, c2: f64) -> SystemParams {
    SystemParams {
        c1,
        c2,
        ..params.clone()
    }
}

pub fn step(params: &SystemParams) -> f64 {
    params.horizon / 2000.0
}

pub fn composite_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`, started on 64
/// panels so that narrow peaks are not skipped by the first estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PANELS { b } else { lo + h };
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 40)
        })
        .sum()
}

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::export::sig6;
use crate::model::{CodeSpec, SystemParams};
use crate::rk4::{uniform_steps, Rk4};

/// Coefficients of `ṗ_k = μ_k p_k − (d − k)λ p_{k+1} − c₂βλ(d − k)`.
#[derive(Debug, Clone)]
struct CostateDynamics {
    outflow: Vec<f64>,
    coupling: Vec<f64>,
    forcing: Vec<f64>,
}

impl CostateDynamics {
    fn new(params: &SystemParams, code: &CodeSpec) -> Self {
        let d = code.degree();
        let cb = params.transfer_cost(code);
        let outflow = (0..=d)
            .map(|k| params.mu + params.lambda * (d - k) as f64)
            .collect();
        let coupling = (0..=d).map(|k| params.lambda * (d - k) as f64).collect();
        let forcing = (0..=d)
            .map(|k| cb * params.lambda * (d - k) as f64)
            .collect();
        Self {
            outflow,
            coupling,
            forcing,
        }
    }

    fn pdot(&self, p: &[f64], out: &mut [f64]) {
        let last = p.len() - 1;
        for k in 0..last {
            out[k] = self.outflow[k] * p[k] - self.coupling[k] * p[k + 1] - self.forcing[k];
        }
        out[last] = self.outflow[last] * p[last];
    }
}

#[cfg(test)]
pub(crate) fn costate_rhs(params: &SystemParams, code: &CodeSpec, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    CostateDynamics::new(params, code).pdot(p, &mut out);
    out
}

/// Costate trajectory on a uniform grid over `[0, T]`.
///
/// Stores `ṗ` at each node so values between nodes come from cubic Hermite
/// interpolation, which keeps the RK4 order.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub grid: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub pdot: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl CostateTrajectory {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let t = t.clamp(0.0, self.horizon());
        let last = self.grid.len() - 1;
        let i = self
            .grid
            .partition_point(|&g| g <= t)
            .saturating_sub(1)
            .min(last - 1);
        let h = self.grid[i + 1] - self.grid[i];
        (i, h, (t - self.grid[i]) / h)
    }

    fn hermite(&self, i: usize, h: f64, s: f64, k: usize) -> f64 {
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.p[i][k]
            + h10 * h * self.pdot[i][k]
            + h01 * self.p[i + 1][k]
            + h11 * h * self.pdot[i + 1][k]
    }

    /// `p₀(t)`.
    pub fn p0_at(&self, t: f64) -> f64 {
        let (i, h, s) = self.locate(t);
        self.hermite(i, h, s, 0)
    }

    /// Full costate vector at `t`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let (i, h, s) = self.locate(t);
        (0..self.p[i].len()).map(|k| self.hermite(i, h, s, k)).collect()
    }

    /// CSV with header `t,p0,...,pd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.p.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|k| format!("p{k}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, p) in self.grid.iter().zip(&self.p) {
            let mut row = vec![sig6(*t)];
            row.extend(p.iter().map(|&v| sig6(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the costate system backward from `p(T) = (0, …, 0, −γ)`.
///
/// The augmentation costate for the path constraint vanishes on feasible
/// arcs and is not carried.
pub fn adjoint_backward(
    params: &SystemParams,
    code: &CodeSpec,
    gamma: f64,
    step: f64,
) -> Result<CostateTrajectory> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be finite and >= 0, got {gamma}"),
        });
    }
    let dynamics = CostateDynamics::new(params, code);
    let horizon = params.horizon;
    let steps = uniform_steps(horizon, step, dynamics.outflow[0])?;
    let h = horizon / steps as f64;
    let dim = code.degree() + 1;

    let mut p = vec![0.0; dim];
    p[dim - 1] = -gamma;
    let mut rk = Rk4::new(dim);
    // Backward time v = T − t turns the terminal value problem into an
    // initial value problem with dq/dv = −ṗ.
    let mut values = Vec::with_capacity(steps + 1);
    values.push(p.clone());
    for j in 0..steps {
        rk.step(
            |q, dq| {
                dynamics.pdot(q, dq);
                dq.iter_mut().for_each(|v| *v = -*v);
            },
            &mut p,
            h,
        );
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                time: horizon - (j + 1) as f64 * h,
            });
        }
        values.push(p.clone());
    }
    values.reverse();

    let grid: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { horizon } else { i as f64 * h })
        .collect();
    let pdot = values
        .iter()
        .map(|p| {
            let mut out = vec![0.0; dim];
            dynamics.pdot(p, &mut out);
            out
        })
        .collect();
    Ok(CostateTrajectory {
        grid,
        p: values,
        pdot,
        gamma,
    })
}

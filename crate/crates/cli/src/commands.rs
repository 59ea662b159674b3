//! Subcommand implementations. Each returns a value that `main` serialises.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use regen_core::export::sig6;
use regen_core::mdp_sim::{monte_carlo, SimConfig, SimStats};
use regen_core::optimizer::{write_sweep_csv, SweepCell};
use regen_core::pontryagin::adjoint_backward;
use regen_core::{
    feasibility_check, integrate, solve, sweep, CodeSpec, ConstantControl, FeasibilityReport, SolveResult, SystemParams,
    ThresholdPolicy,
};
use serde::Serialize;

use crate::config::{ScenarioConfig, BITS_PER_GIGABYTE};
use crate::error::CliError;

/// Relative tolerance of the dimensioning bisection.
const DIMENSION_RTOL: f64 = 1e-3;

pub fn feasibility(cfg: &ScenarioConfig) -> Result<FeasibilityReport, CliError> {
    let (code, params) = cfg.model()?;
    let step = cfg.solver_options()?.step_for(params.horizon);
    feasibility_check(&params, &code, params.levels(&code), step).map_err(CliError::from_core)
}

/// Solves the scenario and, if `emit` is set, writes `p0.csv`, `u.csv` and
/// `xd.csv` there.
pub fn solve_scenario(cfg: &ScenarioConfig, emit: Option<&Path>) -> Result<SolveResult, CliError> {
    let (code, params) = cfg.model()?;
    let opts = cfg.solver_options()?;
    let result = solve(&params, &code, &opts).map_err(CliError::from_core)?;
    if let Some(dir) = emit {
        write_trajectories(dir, &result, &params, &code, opts.step_for(params.horizon))?;
    }
    Ok(result)
}

fn write_series(path: &Path, header: &str, rows: impl Iterator<Item = (f64, f64)>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for (t, v) in rows {
        writeln!(w, "{},{}", sig6(t), sig6(v))?;
    }
    w.flush()?;
    Ok(())
}

fn write_trajectories(
    dir: &Path,
    result: &SolveResult,
    params: &SystemParams,
    code: &CodeSpec,
    step: f64,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let traj = &result.trajectory;
    let costate = adjoint_backward(params, code, result.gamma_star, step).map_err(CliError::from_core)?;
    write_series(
        &dir.join("p0.csv"),
        "t,p0",
        traj.grid.iter().map(|&t| (t, costate.p0_at(t))),
    )?;
    write_series(
        &dir.join("u.csv"),
        "t,u",
        traj.grid.iter().enumerate().map(|(i, &t)| (t, traj.control_at_point(i))),
    )?;
    write_series(&dir.join("xd.csv"), "t,x_d", traj.grid.iter().copied().zip(traj.x_d_series()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CostUnit {
    /// Dollars per gigabyte.
    Gigabyte,
    /// Dollars per bit.
    Bit,
}

impl CostUnit {
    pub fn to_per_gigabyte(self, v: f64) -> f64 {
        match self {
            CostUnit::Gigabyte => v,
            CostUnit::Bit => v * BITS_PER_GIGABYTE,
        }
    }
}

/// Solves every cost combination. Per-cell failures are kept in the cells.
pub fn sweep_costs(
    cfg: &ScenarioConfig,
    c1: &[f64],
    c2: &[f64],
    unit: CostUnit,
) -> Result<Vec<SweepCell>, CliError> {
    let (code, params) = cfg.model()?;
    let opts = cfg.solver_options()?;
    if c1.iter().chain(c2).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(CliError::Config("costs must be finite and >= 0".into()));
    }
    let c2: Vec<f64> = c2.iter().map(|&v| unit.to_per_gigabyte(v)).collect();
    sweep(&params, &code, c1, &c2, &opts).map_err(CliError::from_core)
}

pub fn sweep_csv(cells: &[SweepCell]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_sweep_csv(cells, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySource {
    Given { t_on: f64, t_off: f64 },
    FromSolve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub policy: PolicySource,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub operational_failures: bool,
    pub scale: f64,
    /// Number of evenly spaced points at which the mean state is recorded.
    pub record_points: usize,
    pub keep_runs: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub policy: ThresholdPolicy,
    pub stats: SimStats,
}

pub fn simulate(cfg: &ScenarioConfig, args: &SimulateArgs) -> Result<SimulateReport, CliError> {
    let (code, params) = cfg.model()?;
    let policy = match args.policy {
        PolicySource::Given { t_on, t_off } => {
            ThresholdPolicy::new(t_on, t_off, params.horizon).map_err(CliError::from_core)?
        }
        PolicySource::FromSolve => {
            solve(&params, &code, &cfg.solver_options()?)
                .map_err(CliError::from_core)?
                .policy
        }
    };
    let record_grid = match args.record_points {
        0 => Vec::new(),
        1 => vec![params.horizon],
        m => (0..m)
            .map(|i| params.horizon * i as f64 / (m - 1) as f64)
            .collect(),
    };
    let seed = args.seed.unwrap_or(cfg.sim.seed);
    let sim = SimConfig {
        seed,
        runs: args.runs.unwrap_or(cfg.sim.runs),
        record_grid,
        operational_failures: args.operational_failures,
        scale: args.scale,
        keep_runs: args.keep_runs,
    };
    let stats = monte_carlo(&params, &code, &policy, &sim).map_err(CliError::from_core)?;
    Ok(SimulateReport { seed, policy, stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum DimensionTarget {
    /// Deadline `T` (s).
    #[value(name = "T")]
    #[serde(rename = "T")]
    Horizon,
    /// Chunk transfer rate (1/s).
    #[value(name = "lambda")]
    #[serde(rename = "lambda")]
    Lambda,
    /// Repair degree.
    #[value(name = "d")]
    #[serde(rename = "d")]
    Degree,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub target: DimensionTarget,
    /// Smallest feasible value found (within the relative tolerance for
    /// continuous targets).
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub evaluations: usize,
    /// Critical failure rate at `value`.
    pub mu_bar: Option<f64>,
    pub feasibility: FeasibilityReport,
}

struct Probe<'a> {
    cfg: &'a ScenarioConfig,
    code: CodeSpec,
    params: SystemParams,
    step_fraction: f64,
    target: DimensionTarget,
    evaluations: usize,
}

impl Probe<'_> {
    fn at(&self, v: f64) -> Result<(CodeSpec, SystemParams), CliError> {
        let mut params = self.params.clone();
        let mut code = self.code.clone();
        match self.target {
            DimensionTarget::Horizon => params.horizon = v,
            DimensionTarget::Lambda => params.lambda = v,
            DimensionTarget::Degree => {
                let c = &self.cfg.code;
                code = CodeSpec::new(c.variant, c.n, c.k, v as u32, c.b_gigabytes)
                    .map_err(CliError::from_core)?;
                params.lambda = self.cfg.lambda(&code)?;
            }
        }
        Ok((code, params))
    }

    /// Feasibility verdict only: full activation meets both constraints.
    fn feasible(&mut self, v: f64) -> Result<bool, CliError> {
        self.evaluations += 1;
        let (code, params) = self.at(v)?;
        let levels = params.levels(&code);
        let traj = integrate(
            &params,
            &code,
            &ConstantControl(1.0),
            &params.initial_state(&code),
            self.step_fraction * params.horizon,
        )
        .map_err(CliError::from_core)?;
        Ok(traj.x_d_terminal() >= levels.n && traj.x_d_min() >= levels.d)
    }

    fn report(&self, v: f64) -> Result<FeasibilityReport, CliError> {
        let (code, params) = self.at(v)?;
        let step = self.step_fraction * params.horizon;
        feasibility_check(&params, &code, params.levels(&code), step).map_err(CliError::from_core)
    }
}

/// Smallest value of `target` in `[lower, upper]` for which the scenario is
/// feasible, all other parameters held fixed. Feasibility is assumed
/// monotone in `T` and `λ`; the degree is scanned exhaustively.
pub fn dimension(
    cfg: &ScenarioConfig,
    target: DimensionTarget,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Result<DimensionReport, CliError> {
    let (code, params) = cfg.model()?;
    cfg.solver_options()?;
    let step_fraction = cfg.solver.step_fraction;
    let (lo, hi) = match target {
        DimensionTarget::Horizon => (
            lower.unwrap_or(params.horizon * 1e-2),
            upper.unwrap_or(params.horizon * 10.0),
        ),
        DimensionTarget::Lambda => (
            lower.unwrap_or(params.lambda * 1e-2),
            upper.unwrap_or(params.lambda * 1e2),
        ),
        DimensionTarget::Degree => (
            lower.unwrap_or(f64::from(code.k + 1)),
            upper.unwrap_or(f64::from(code.n - 1)),
        ),
    };
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Config(format!("bounds must satisfy lower < upper, got [{lo}, {hi}]")));
    }
    match target {
        DimensionTarget::Degree => {
            if lo.fract() != 0.0 || hi.fract() != 0.0 || lo <= f64::from(code.k) || hi >= f64::from(code.n) {
                return Err(CliError::Config(format!(
                    "degree bounds must be integers in ({}, {})",
                    code.k, code.n
                )));
            }
        }
        _ => {
            if !(lo > 0.0) {
                return Err(CliError::Config(format!("lower bound must be > 0, got {lo}")));
            }
        }
    }

    let mut probe = Probe {
        cfg,
        code,
        params,
        step_fraction,
        target,
        evaluations: 0,
    };
    let none_feasible = || {
        CliError::Infeasible(format!("no feasible value of the target in [{lo}, {hi}]"))
    };

    let value = if target == DimensionTarget::Degree {
        let mut found = None;
        for d in (lo as u32)..=(hi as u32) {
            if probe.feasible(f64::from(d))? {
                found = Some(f64::from(d));
                break;
            }
        }
        found.ok_or_else(none_feasible)?
    } else if !probe.feasible(hi)? {
        return Err(none_feasible());
    } else if probe.feasible(lo)? {
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        while b - a > DIMENSION_RTOL * b {
            let mid = 0.5 * (a + b);
            if probe.feasible(mid)? {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    };
    let feasibility = probe.report(value)?;
    Ok(DimensionReport {
        target,
        value,
        lower: lo,
        upper: hi,
        evaluations: probe.evaluations,
        mu_bar: feasibility.mu_bar,
        feasibility,
    })
}

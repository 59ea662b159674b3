use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use regen_cli::commands::{self, CostUnit, DimensionTarget, PolicySource, SimulateArgs};
use regen_cli::{CliError, ScenarioConfig};
use serde::Serialize;

/// Optimal activation control for storage regeneration after a correlated
/// server fault.
#[derive(Parser, Debug)]
#[command(name = "regen", version)]
struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result into this directory instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full-activation feasibility report.
    Feasibility,
    /// Optimal threshold policy.
    Solve {
        /// Directory for p0.csv, u.csv and xd.csv.
        #[arg(long)]
        emit_trajectories: Option<PathBuf>,
    },
    /// Optimal cost over a grid of (c1, c2).
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        c1: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        c2: Vec<f64>,
        /// Unit of the c2 values.
        #[arg(long, value_enum, default_value = "gigabyte")]
        c2_unit: CostUnit,
    },
    /// Monte Carlo simulation of the Markov model under a threshold policy.
    Simulate(SimulateCli),
    /// Smallest feasible value of one parameter, the others held fixed.
    Dimension {
        #[arg(long, value_enum)]
        target: DimensionTarget,
        #[arg(long)]
        lower: Option<f64>,
        #[arg(long)]
        upper: Option<f64>,
    },
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["policy", "from_solve"])))]
struct SimulateCli {
    /// Switch epochs `t_on,t_off` (s).
    #[arg(long, value_name = "T_ON,T_OFF", value_parser = parse_policy)]
    policy: Option<(f64, f64)>,
    /// Use the optimal policy of the scenario.
    #[arg(long)]
    from_solve: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Let operational servers fail during regeneration.
    #[arg(long)]
    operational_failures: bool,
    /// Population scale factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Record the mean state at this many evenly spaced times.
    #[arg(long, default_value_t = 0)]
    record_points: usize,
    /// Write one row per run to this CSV file.
    #[arg(long)]
    per_run_csv: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t_on,t_off")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ScenarioConfig::load(&path)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Feasibility => emit(out, "feasibility.json", &json(&commands::feasibility(&cfg)?)?),
        Command::Solve { emit_trajectories } => {
            let r = commands::solve_scenario(&cfg, emit_trajectories.as_deref())?;
            emit(out, "solve.json", &json(&r)?)
        }
        Command::Sweep { c1, c2, c2_unit } => {
            let cells = commands::sweep_costs(&cfg, &c1, &c2, c2_unit)?;
            for cell in &cells {
                if let Err(e) = &cell.outcome {
                    eprintln!("cell c1={} c2={}: {e}", cell.c1, cell.c2);
                }
            }
            emit(out, "sweep.csv", &commands::sweep_csv(&cells)?)
        }
        Command::Simulate(s) => {
            let policy = match s.policy {
                Some((t_on, t_off)) => PolicySource::Given { t_on, t_off },
                None => PolicySource::FromSolve,
            };
            let args = SimulateArgs {
                policy,
                runs: s.runs,
                seed: s.seed,
                operational_failures: s.operational_failures,
                scale: s.scale,
                record_points: s.record_points,
                keep_runs: s.per_run_csv.is_some(),
            };
            let report = commands::simulate(&cfg, &args)?;
            if let Some(p) = &s.per_run_csv {
                report.stats.write_runs_csv(std::io::BufWriter::new(std::fs::File::create(p)?))?;
            }
            emit(out, "simulate.json", &json(&report)?)
        }
        Command::Dimension {
            target,
            lower,
            upper,
        } => emit(
            out,
            "dimension.json",
            &json(&commands::dimension(&cfg, target, lower, upper)?)?,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Event-driven simulation of the controlled Markov population model.
//!
//! Between control switches the process is a continuous-time Markov chain
//! with transitions
//!
//! ```text
//! activation          x → x + e₀             rate ζu
//! failure (k < d)     x → x − e_k            rate μ x_k
//! chunk acquisition   x → x − e_{k−1} + e_k  rate (d − k + 1)λ x_{k−1}
//! ```
//!
//! and, when `operational_failures` is set, `x → x − e_d` at rate `μ x_d` to
//! match the fluid model. Waiting times are truncated at switch epochs, where
//! the rates are re-read.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::sig6;
use crate::fluid::Control;
use crate::model::{CodeSpec, SystemParams};
use crate::numeric::CompensatedSum;

/// Runs per work unit. Results are merged in chunk order, so they do not
/// depend on the number of threads.
const CHUNK: usize = 128;

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub runs: usize,
    /// Times at which the mean state is recorded.
    pub record_grid: Vec<f64>,
    /// Let operational servers fail at rate `μ`.
    pub operational_failures: bool,
    /// Population scale `s`: the initial state, activation rate and the
    /// thresholds `n`, `d`, `k` are multiplied by `s`, and all reported
    /// statistics are divided by it.
    pub scale: f64,
    /// Keep one [`RunRecord`] per path.
    pub keep_runs: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1000,
            record_grid: Vec::new(),
            operational_failures: false,
            scale: 1.0,
            keep_runs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub p: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub half_width: f64,
}

impl ProbabilityEstimate {
    fn from_counts(hits: u64, runs: u64) -> Self {
        let n = runs as f64;
        let p = hits as f64 / n;
        Self {
            p,
            half_width: Z95 * (p * (1.0 - p) / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub terminal_xd: u64,
    pub min_xd: u64,
    pub cost: f64,
    pub absorbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub runs: usize,
    pub scale: f64,
    /// `P(X_d(T) ≥ n)`.
    pub p_terminal_success: ProbabilityEstimate,
    /// `P(min_t X_d(t) < d)`.
    pub p_path_violation: ProbabilityEstimate,
    /// `P(X_d < k)` at some point (state lost).
    pub p_absorbed: ProbabilityEstimate,
    pub mean_cost: MeanEstimate,
    pub mean_terminal_xd: MeanEstimate,
    pub record_grid: Vec<f64>,
    /// Mean `(X₀, …, X_d)` at each point of `record_grid`.
    pub mean_trajectory: Vec<Vec<f64>>,
    #[serde(skip)]
    pub per_run: Vec<RunRecord>,
}

impl SimStats {
    pub fn write_runs_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "run,terminal_xd,min_xd,cost,absorbed")?;
        for r in &self.per_run {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.run,
                r.terminal_xd,
                r.min_xd,
                sig6(r.cost),
                r.absorbed
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Activation,
    /// A server holding `compartment` chunks leaves.
    Failure { compartment: usize },
    /// A server moves from `to − 1` to `to` chunks.
    Acquisition { to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Per-path switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub operational_failures: bool,
    /// The path is absorbed (state lost) once `x_d` drops below this level.
    pub absorption_level: f64,
    pub record_events: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// Empty unless `record_events` was set.
    pub events: Vec<Event>,
    pub terminal: Vec<u64>,
    pub cost: f64,
    pub min_xd: u64,
    pub absorbed: bool,
    /// State at each point of the requested record grid.
    pub recorded: Vec<Vec<u64>>,
}

/// Independent stream `run` of the generator family keyed by `seed`.
pub fn path_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Simulates one path on `[0, T]` from the integer state `x0`. The control
/// must be constant between its switch epochs.
///
/// `record_grid` must be sorted; each entry receives the state in force at
/// that time.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &SystemParams,
    code: &CodeSpec,
    policy: &dyn Control,
    x0: &[u64],
    rng: &mut R,
    options: &PathOptions,
    record_grid: &[f64],
) -> Result<SamplePath> {
    let d = code.degree();
    if x0.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            actual: x0.len(),
        });
    }
    let horizon = params.horizon;
    let transfer_cost = params.transfer_cost(code);
    let mut epochs: Vec<f64> = policy
        .switch_epochs()
        .into_iter()
        .filter(|&e| e > 0.0 && e < horizon)
        .collect();
    epochs.push(horizon);
    epochs.sort_by(f64::total_cmp);

    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut cost = 0.0;
    let mut min_xd = x[d];
    let mut events = Vec::new();
    let mut recorded = Vec::with_capacity(record_grid.len());
    let mut next_record = 0;
    let mut absorbed = (x[d] as f64) < options.absorption_level;

    // Rates: [activation, acquisition into 1..=d, failure of 0..=d].
    let mut rates = vec![0.0; 2 * d + 2];
    let mut epoch_idx = 0;

    while !absorbed && t < horizon {
        while epochs[epoch_idx] <= t {
            epoch_idx += 1;
        }
        let segment_end = epochs[epoch_idx];
        let u = policy.value(0.5 * (t + segment_end));

        rates[0] = params.zeta * u;
        for k in 1..=d {
            rates[k] = (d - k + 1) as f64 * params.lambda * x[k - 1] as f64;
        }
        for k in 0..d {
            rates[d + 1 + k] = params.mu * x[k] as f64;
        }
        rates[2 * d + 1] = if options.operational_failures {
            params.mu * x[d] as f64
        } else {
            0.0
        };
        let total: f64 = rates.iter().sum();

        let wait = if total > 0.0 {
            -(1.0 - rng.random::<f64>()).ln() / total
        } else {
            f64::INFINITY
        };
        if t + wait >= segment_end {
            t = segment_end;
            continue;
        }
        t += wait;
        while next_record < record_grid.len() && record_grid[next_record] < t {
            recorded.push(x.clone());
            next_record += 1;
        }

        let mut target = rng.random::<f64>() * total;
        let mut which = rates.len() - 1;
        for (i, &r) in rates.iter().enumerate() {
            if target < r {
                which = i;
                break;
            }
            target -= r;
        }
        // Guard against round-off selecting a zero-rate transition.
        if rates[which] == 0.0 {
            which = rates.iter().rposition(|&r| r > 0.0).expect("total > 0");
        }

        let kind = if which == 0 {
            x[0] += 1;
            cost += params.c1;
            EventKind::Activation
        } else if which <= d {
            x[which - 1] -= 1;
            x[which] += 1;
            cost += transfer_cost;
            EventKind::Acquisition { to: which }
        } else {
            let k = which - d - 1;
            x[k] -= 1;
            EventKind::Failure { compartment: k }
        };
        if options.record_events {
            events.push(Event { time: t, kind });
        }
        min_xd = min_xd.min(x[d]);
        absorbed = (x[d] as f64) < options.absorption_level;
    }
    while next_record < record_grid.len() {
        recorded.push(x.clone());
        next_record += 1;
    }

    Ok(SamplePath {
        events,
        terminal: x,
        cost,
        min_xd,
        absorbed,
        recorded,
    })
}

/// Streaming mean and variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
    sum: CompensatedSum,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (v - self.mean);
        self.sum.add(v);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.m2 += other.m2 + delta * delta * self.count * other.count / n;
        self.mean += delta * other.count / n;
        self.count = n;
        self.sum.merge(&other.sum);
    }

    fn estimate(&self, scale: f64) -> MeanEstimate {
        let var = if self.count > 1.0 {
            self.m2 / (self.count - 1.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean: self.sum.value() / self.count / scale,
            std_error: (var / self.count).sqrt() / scale,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    runs: u64,
    successes: u64,
    violations: u64,
    absorbed: u64,
    cost: Moments,
    terminal: Moments,
    /// Integer sums, exact in `f64` far beyond any realistic run count.
    trajectory: Vec<Vec<f64>>,
    records: Vec<RunRecord>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.runs += other.runs;
        self.successes += other.successes;
        self.violations += other.violations;
        self.absorbed += other.absorbed;
        self.cost.merge(&other.cost);
        self.terminal.merge(&other.terminal);
        if self.trajectory.is_empty() {
            self.trajectory = other.trajectory;
        } else {
            for (a, b) in self.trajectory.iter_mut().zip(&other.trajectory) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
        self.records.extend(other.records);
    }
}

/// Monte Carlo estimate of the path statistics under `policy`.
///
/// Path `i` uses stream `i` of the generator keyed by `config.seed`, so the
/// output is reproducible for a fixed seed and run count regardless of the
/// number of worker threads.
pub fn monte_carlo(
    params: &SystemParams,
    code: &CodeSpec,
    policy: &dyn Control,
    config: &SimConfig,
) -> Result<SimStats> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter {
            name: "runs",
            reason: "must be >= 1".into(),
        });
    }
    let s = config.scale;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: format!("must be finite and > 0, got {s}"),
        });
    }
    let horizon = params.horizon;
    if config
        .record_grid
        .iter()
        .any(|&g| !(0.0..=horizon).contains(&g))
        || config.record_grid.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::InvalidParameter {
            name: "record_grid",
            reason: "must be sorted and lie within [0, T]".into(),
        });
    }
    if let Some(e) = policy.switch_epochs().into_iter().find(|&e| !(0.0..=horizon).contains(&e)) {
        return Err(Error::InvalidParameter {
            name: "policy",
            reason: format!("switch epoch {e} lies outside [0, {horizon}]"),
        });
    }

    let scaled = SystemParams {
        zeta: params.zeta * s,
        ..params.clone()
    };
    let levels = params.levels(code);
    let n_level = levels.n * s;
    let d_level = levels.d * s;
    let mut x0 = vec![0u64; code.degree() + 1];
    x0[code.degree()] = (params.x_d0 * s).round() as u64;
    let options = PathOptions {
        operational_failures: config.operational_failures,
        absorption_level: f64::from(code.k) * s,
        record_events: false,
    };

    let chunks = config.runs.div_ceil(CHUNK);
    let tallies: Vec<Result<Tally>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally {
                trajectory: vec![vec![0.0; x0.len()]; config.record_grid.len()],
                ..Tally::default()
            };
            let start = c * CHUNK;
            let end = (start + CHUNK).min(config.runs);
            for run in start..end {
                let mut rng = path_rng(config.seed, run as u64);
                let path = simulate_path(
                    &scaled,
                    code,
                    policy,
                    &x0,
                    &mut rng,
                    &options,
                    &config.record_grid,
                )?;
                let xd = path.terminal[code.degree()];
                tally.runs += 1;
                tally.successes += u64::from(xd as f64 >= n_level);
                tally.violations += u64::from((path.min_xd as f64) < d_level);
                tally.absorbed += u64::from(path.absorbed);
                tally.cost.push(path.cost);
                tally.terminal.push(xd as f64);
                for (acc, state) in tally.trajectory.iter_mut().zip(&path.recorded) {
                    for (a, &v) in acc.iter_mut().zip(state) {
                        *a += v as f64;
                    }
                }
                if config.keep_runs {
                    tally.records.push(RunRecord {
                        run: run as u64,
                        terminal_xd: xd,
                        min_xd: path.min_xd,
                        cost: path.cost,
                        absorbed: path.absorbed,
                    });
                }
            }
            Ok(tally)
        })
        .collect();

    let mut total = Tally::default();
    for t in tallies {
        total.merge(t?);
    }
    let runs = total.runs;
    let denom = runs as f64 * s;
    Ok(SimStats {
        runs: config.runs,
        scale: s,
        p_terminal_success: ProbabilityEstimate::from_counts(total.successes, runs),
        p_path_violation: ProbabilityEstimate::from_counts(total.violations, runs),
        p_absorbed: ProbabilityEstimate::from_counts(total.absorbed, runs),
        mean_cost: total.cost.estimate(s),
        mean_terminal_xd: total.terminal.estimate(s),
        record_grid: config.record_grid.clone(),
        mean_trajectory: total
            .trajectory
            .iter()
            .map(|row| row.iter().map(|v| v / denom).collect())
            .collect(),
        per_run: total.records,
    })
}

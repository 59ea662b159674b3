//! Code and system parameterisation shared by every other module.
//!
//! Counts of servers are real-valued here: the fluid model tracks expected
//! populations, and only the stochastic simulator rounds to integers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating point of a regenerating code on the storage/bandwidth trade-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeVariant {
    /// Minimum-bandwidth regenerating.
    #[serde(rename = "MBR")]
    Mbr,
    /// Minimum-storage regenerating.
    #[serde(rename = "MSR")]
    Msr,
}

/// A repairing code `(n, k, d)` together with the chunk sizes it induces for
/// a state of `state_size_gb` gigabytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub variant: CodeVariant,
    /// Total encoded chunks, one per server.
    pub n: u32,
    /// Data chunks needed to decode the full state.
    pub k: u32,
    /// Repair degree: helpers contacted to regenerate one chunk.
    pub d: u32,
    pub state_size_gb: f64,
    /// Stored chunk size per server (GB).
    pub alpha_gb: f64,
    /// Repair transfer size per helper (GB).
    pub beta_gb: f64,
}

impl CodeSpec {
    /// Builds the code and derives `(α, β)` for the chosen variant.
    ///
    /// MBR uses `β = 2B / (k(2d − k + 1))` and `α = dβ`; MSR uses `α = B/k`
    /// and `β = α / (d − k + 1)`.
    pub fn new(variant: CodeVariant, n: u32, k: u32, d: u32, state_size_gb: f64) -> Result<Self> {
        if !(n > d && d > k && k > 0) {
            return Err(Error::InvalidTriple { n, k, d });
        }
        if !(state_size_gb > 0.0) || !state_size_gb.is_finite() {
            return Err(Error::NonPositiveSize(state_size_gb));
        }
        let (kf, df, b) = (f64::from(k), f64::from(d), state_size_gb);
        let (alpha_gb, beta_gb) = match variant {
            CodeVariant::Mbr => {
                let beta = 2.0 * b / (kf * (2.0 * df - kf + 1.0));
                (df * beta, beta)
            }
            CodeVariant::Msr => {
                let alpha = b / kf;
                (alpha, alpha / (df - kf + 1.0))
            }
        };
        Ok(Self {
            variant,
            n,
            k,
            d,
            state_size_gb,
            alpha_gb,
            beta_gb,
        })
    }

    /// Repair degree as an index bound; the fluid state has `degree() + 1`
    /// compartments.
    pub fn degree(&self) -> usize {
        self.d as usize
    }

    /// `β` expressed in gigabits.
    pub fn beta_gbit(&self) -> f64 {
        8.0 * self.beta_gb
    }
}

/// What can still be done with `x_d` operational repair servers.
///
/// Ordered from worst to best so that comparisons follow severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RestorationMode {
    StateLost,
    FullRestorationOnly,
    Regeneration,
}

pub fn restoration_mode(x_d: f64, code: &CodeSpec) -> RestorationMode {
    if x_d >= f64::from(code.d) {
        RestorationMode::Regeneration
    } else if x_d >= f64::from(code.k) {
        RestorationMode::FullRestorationOnly
    } else {
        RestorationMode::StateLost
    }
}

/// Tightened constraint levels `(n', d') = ((1+ε₂)n, (1+ε₁)d)`.
pub fn apply_margins(n: f64, d: f64, eps1: f64, eps2: f64) -> (f64, f64) {
    ((1.0 + eps2) * n, (1.0 + eps1) * d)
}

/// Terminal target and path floor actually enforced by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLevels {
    /// Terminal target on `X_d(T)`.
    pub n: f64,
    /// Lower bound on `X_d(t)` over the horizon.
    pub d: f64,
}

/// Rates, costs and horizon of one regeneration episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Failure rate of a repair server (1/s).
    pub mu: f64,
    /// Chunk transfer completion rate (1/s).
    pub lambda: f64,
    /// Maximum activation rate (servers/s).
    pub zeta: f64,
    /// Cost per activated server (dollars).
    pub c1: f64,
    /// Transfer cost (dollars per gigabyte).
    pub c2: f64,
    /// Deadline `T` (s).
    pub horizon: f64,
    /// Operational repair servers right after the fault.
    pub x_d0: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl SystemParams {
    pub fn validate(&self, code: &CodeSpec) -> Result<()> {
        fn check(ok: bool, name: &'static str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: reason.to_string(),
                })
            }
        }
        check(self.mu >= 0.0 && self.mu.is_finite(), "mu", "must be finite and >= 0")?;
        check(self.lambda > 0.0 && self.lambda.is_finite(), "lambda", "must be finite and > 0")?;
        check(self.zeta >= 0.0 && self.zeta.is_finite(), "zeta", "must be finite and >= 0")?;
        check(self.c1 >= 0.0 && self.c1.is_finite(), "c1", "must be finite and >= 0")?;
        check(self.c2 >= 0.0 && self.c2.is_finite(), "c2", "must be finite and >= 0")?;
        check(self.horizon > 0.0 && self.horizon.is_finite(), "horizon", "must be finite and > 0")?;
        check(self.eps1 >= 0.0, "eps1", "must be >= 0")?;
        check(self.eps2 >= 0.0, "eps2", "must be >= 0")?;
        check(
            self.x_d0 >= f64::from(code.d) && self.x_d0 <= f64::from(code.n),
            "x_d0",
            "must satisfy d <= x_d0 <= n",
        )
    }

    pub fn levels(&self, code: &CodeSpec) -> ConstraintLevels {
        let (n, d) = apply_margins(f64::from(code.n), f64::from(code.d), self.eps1, self.eps2);
        ConstraintLevels { n, d }
    }

    /// Post-fault state: every surviving server is operational, no
    /// replacement has been activated yet.
    pub fn initial_state(&self, code: &CodeSpec) -> Vec<f64> {
        let mut x = vec![0.0; code.degree() + 1];
        x[code.degree()] = self.x_d0;
        x
    }

    /// Cost of one chunk transfer, `c₂β` (dollars).
    pub fn transfer_cost(&self, code: &CodeSpec) -> f64 {
        self.c2 * code.beta_gb
    }
}

/// Outflow rate `μ_k = μ + λ(d − k)` of compartment `k`.
pub fn mu_rate(k_index: usize, params: &SystemParams, code: &CodeSpec) -> Result<f64> {
    let d = code.degree();
    if k_index > d {
        return Err(Error::IndexOutOfRange {
            index: k_index,
            max: d,
        });
    }
    Ok(params.mu + params.lambda * (d - k_index) as f64)
}

//! Scenario configuration files.

use std::path::Path;

use regen_core::{CodeSpec, CodeVariant, SolverOptions, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bits per gigabyte (decimal units, as for the state size).
pub const BITS_PER_GIGABYTE: f64 = 8e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub code: CodeConfig,
    pub rates: RatesConfig,
    pub costs: CostsConfig,
    pub horizon_s: f64,
    /// Servers lost in the correlated fault, `0 < r <= n - d`.
    pub failed_servers: u32,
    #[serde(default)]
    pub margins: MarginsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub variant: CodeVariant,
    pub n: u32,
    pub k: u32,
    pub d: u32,
    #[serde(rename = "B_gigabytes")]
    pub b_gigabytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub mu_per_s: f64,
    pub zeta_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_per_s: Option<f64>,
    /// Link throughput; `λ = throughput / β` with `β` in gigabits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_gbit_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    pub c1_dollars: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_dollars_per_gigabyte: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_dollars_per_bit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginsConfig {
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Bisection band on `|X_d(T) − n|`.
    pub epsilon: f64,
    /// Integration step as a fraction of the horizon.
    pub step_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            step_fraction: 1.0 / 2000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: u64,
    pub runs: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { seed: 0, runs: 1000 }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(e.inner().to_string())
            } else {
                CliError::Config(format!("{path}: {}", e.inner()))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn code_spec(&self) -> Result<CodeSpec, CliError> {
        let c = &self.code;
        CodeSpec::new(c.variant, c.n, c.k, c.d, c.b_gigabytes).map_err(|e| invalid("code", e))
    }

    /// Transfer rate per chunk for `code`.
    pub fn lambda(&self, code: &CodeSpec) -> Result<f64, CliError> {
        match (self.rates.lambda_per_s, self.rates.throughput_gbit_per_s) {
            (Some(l), None) => Ok(l),
            (None, Some(tp)) => {
                if !(tp > 0.0) || !tp.is_finite() {
                    return Err(invalid("rates.throughput_gbit_per_s", "must be finite and > 0"));
                }
                Ok(tp / code.beta_gbit())
            }
            _ => Err(invalid(
                "rates",
                "exactly one of lambda_per_s and throughput_gbit_per_s is required",
            )),
        }
    }

    /// Transfer cost in dollars per gigabyte.
    pub fn c2_per_gigabyte(&self) -> Result<f64, CliError> {
        match (self.costs.c2_dollars_per_gigabyte, self.costs.c2_dollars_per_bit) {
            (Some(v), None) => Ok(v),
            (None, Some(v)) => Ok(v * BITS_PER_GIGABYTE),
            (None, None) => Ok(0.0),
            (Some(_), Some(_)) => Err(invalid(
                "costs",
                "give c2_dollars_per_gigabyte or c2_dollars_per_bit, not both",
            )),
        }
    }

    /// Builds the code and system parameters, checking every constraint the
    /// solver relies on.
    pub fn model(&self) -> Result<(CodeSpec, SystemParams), CliError> {
        let code = self.code_spec()?;
        let r = self.failed_servers;
        if r == 0 || r > code.n - code.d {
            return Err(invalid(
                "failed_servers",
                format!("must satisfy 0 < r <= n - d = {}, got {r}", code.n - code.d),
            ));
        }
        let params = SystemParams {
            mu: self.rates.mu_per_s,
            lambda: self.lambda(&code)?,
            zeta: self.rates.zeta_per_s,
            c1: self.costs.c1_dollars,
            c2: self.c2_per_gigabyte()?,
            horizon: self.horizon_s,
            x_d0: f64::from(code.n - r),
            eps1: self.margins.eps1,
            eps2: self.margins.eps2,
        };
        params.validate(&code).map_err(CliError::from_core)?;
        Ok((code, params))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let s = &self.solver;
        if !(s.epsilon > 0.0) || !s.epsilon.is_finite() {
            return Err(invalid("solver.epsilon", "must be finite and > 0"));
        }
        if !(s.step_fraction > 0.0 && s.step_fraction <= 1.0) {
            return Err(invalid("solver.step_fraction", "must lie in (0, 1]"));
        }
        Ok(SolverOptions {
            epsilon: s.epsilon,
            step: Some(s.step_fraction * self.horizon_s),
            ..SolverOptions::default()
        })
    }
}

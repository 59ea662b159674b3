use regen_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::NoConvergence(_) => 4,
        }
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Infeasible(_) => CliError::Infeasible(e.to_string()),
            Error::NoConvergence { .. } | Error::GammaDiscoveryFailed { .. } => {
                CliError::NoConvergence(e.to_string())
            }
            Error::InvalidTriple { .. }
            | Error::NonPositiveSize(_)
            | Error::InvalidParameter { .. }
            | Error::ControlOutOfRange(_)
            | Error::StepTooLarge { .. } => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

//! Command-line front end for `regen-core`: scenario configuration,
//! subcommands and result serialisation.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ScenarioConfig;
pub use error::CliError;

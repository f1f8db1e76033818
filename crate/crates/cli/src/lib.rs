//! Config-driven front end for the `fwpath` solvers.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Command, ModelConfig, RunConfig, FORMAT_VERSION};
pub use error::CliError;

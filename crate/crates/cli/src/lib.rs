//! Command-line surface for sugsvarsel: `cluster`, `simulate` and `evaluate`.
//!
//! The binary is a thin wrapper; everything it does is available here so the
//! commands can be driven from tests.

pub mod cli;
pub mod commands;
pub mod config;
mod error;

pub use commands::{cmd_cluster, cmd_evaluate, cmd_simulate, ClusterOutcome, Metrics, ModelsFile};
pub use config::RunConfig;
pub use error::CliError;

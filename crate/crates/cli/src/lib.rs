//! Library half of the `codclust` command: data set files, result files,
//! batch experiments and the subcommand implementations.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod result;

pub use error::{CliError, CliResult};

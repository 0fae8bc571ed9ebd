//! Command-line front end: trajectory CSV and model JSON formats, run
//! configuration, and the `estimate-innovations`, `build`, `predict` and
//! `benchmark` subcommands.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod model_file;
pub mod output;

pub use error::{CliError, CliResult};

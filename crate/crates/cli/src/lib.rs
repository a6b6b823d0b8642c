//! Command-line front end: fit case data, simulate trajectories, compare
//! intervention scenarios and write JSON, CSV and SVG artifacts.

pub mod chart;
pub mod config;
pub mod run;

pub use config::{Cli, Format, RunConfig, Subcommand};
pub use run::{execute, CliError};

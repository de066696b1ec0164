//! Batch pipeline around `gridres-core`: run configuration, CSV report
//! tables, and the `simulate`, `risk`, `score`, `full` and `verify`
//! subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod golden;
pub mod report;

pub use commands::{build_bundle, cmd_full, cmd_risk, cmd_score, cmd_simulate, Manifest, ReportBundle};
pub use config::{Overrides, RunConfig};
pub use error::CliError;

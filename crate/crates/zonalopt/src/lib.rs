//! Scenario files, parallel runs, CSV/JSON outputs and the command-line
//! driver around `zonalopt-core`.

pub mod commands;
pub mod error;
pub mod exec;
pub mod output;
pub mod report;
pub mod runner;
pub mod scenario_file;

pub use error::AppError;

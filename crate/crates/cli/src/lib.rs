//! Experiment harness around the `selreg` library: benchmark grids,
//! rejection audits, reports and dataset preparation.

pub mod audit;
pub mod bench;
pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod prep;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Exit code when every cell succeeded.
pub const EXIT_OK: i32 = 0;
/// Exit code for an invalid configuration or input directory.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code when some cells failed and the rest were written.
pub const EXIT_PARTIAL: i32 = 2;
/// Exit code for any other error.
pub const EXIT_FATAL: i32 = 3;

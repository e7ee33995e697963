//! Verification harness for the catalytic OU laboratory: experiment
//! configuration, Monte Carlo summaries, named checks, and the CSV / JSON /
//! SVG artifacts they produce.

pub mod checks;
pub mod config;
pub mod error;
pub mod mc;
pub mod plot;
pub mod report;

pub use checks::{run_check, run_suite};
pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use report::{CheckReport, Report};

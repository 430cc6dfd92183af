//! Batch analysis front end: declarative configs, the end-to-end pipeline,
//! the JSON run report, and plain-text plot data.

pub mod config;
pub mod pipeline;
pub mod plotdata;
pub mod report;

pub use config::{AnalysisConfig, CliError, CliResult};
pub use pipeline::{run_analysis, RunOutcome};
pub use report::HurstReport;

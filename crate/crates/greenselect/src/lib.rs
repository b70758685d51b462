//! Benchmark harness for energy-aware model selection: digits CSV ingestion,
//! physical energy meters, JSON model documents, report emission and the
//! experiment driver behind the `greenselect` CLI.

pub mod dataset;
pub mod experiment;
pub mod meter;
pub mod persist;
pub mod report;

pub use experiment::{run_experiment, sweep_epsilon, ExperimentConfig, ExperimentError, ExperimentOutcome};
pub use report::{emit_report, Format, ReportRow};

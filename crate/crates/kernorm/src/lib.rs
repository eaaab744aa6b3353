//! Harness around `kernorm-core`: CSV ingestion, experiment presets that
//! reproduce the published studies at desk scale, the experiment runner, and
//! CSV/SVG reports.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, MethodKind};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ResultRow};

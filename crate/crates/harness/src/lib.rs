//! File formats, the `loocluster` command line and the Monte Carlo harness
//! built on `loocluster-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod records;
pub mod report;
pub mod seed;

pub use config::{Cell, ExperimentConfig, ExperimentKind, Family, InstanceConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_trial};
pub use records::TrialRecord;
pub use report::{aggregate_report, fit_rate_slope, CellSummary, RateFit};

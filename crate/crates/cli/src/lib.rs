//! Experiment harness for the `elastobie` solver: configuration, sweeps,
//! rate fitting, CSV records and the acceptance checks.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod fit;
pub mod records;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, Outcome, Verdict};
pub use fit::{fit_log_log, fit_rate, RateFit};
pub use records::{Row, Table};

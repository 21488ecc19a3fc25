//! Experiment driver for the classification and robustness lab: reproduces
//! each figure/table artifact at desk scale and emits machine-readable
//! results (JSON + CSV) plus a run manifest.

pub mod config;
pub mod data_access;
pub mod error;
pub mod experiments;
pub mod runner;
pub mod spec;

pub use error::{CliError, CliResult};
pub use runner::{run, RunArtifacts};
pub use spec::{ExperimentId, ExperimentSpec};

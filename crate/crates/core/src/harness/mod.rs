//! Experiment runner: configuration, fitting, result records and the
//! acceptance suite.

pub mod acceptance;
mod common;
pub mod config;
pub mod experiments;
pub mod fit;
pub mod record;

pub use acceptance::{criterion, invariant_suite, CriterionOutcome, CRITERIA};
pub use config::{derive_seed, ExperimentConfig, GridConfig, OutputConfig, PerAxis, T0Policy, TimeConfig};
pub use experiments::{find, run_experiment, ExperimentInfo, EXPERIMENTS};
pub use fit::{fit_loglog, LogLogFit};
pub use record::{Check, Curve, NamedFit, OutputDir, Provenance, ResultRecord, Summary, SummaryEntry};

//! Experiment runner: turns a TOML config into a load, split, learn, model,
//! classify and evaluate pipeline, and writes reports that can be compared
//! across runs.

pub mod compare;
pub mod config;
pub mod error;
pub mod inspect;
pub mod report;
pub mod run;

pub use compare::{compare_reports, compare_runs, Comparison};
pub use config::{ClassifierKind, DatasetSource, ExperimentConfig, LearnerKind, ReportFormat};
pub use error::{RunError, Stage};
pub use inspect::inspect_file;
pub use report::Report;
pub use run::{run_experiment, RunOutcome};

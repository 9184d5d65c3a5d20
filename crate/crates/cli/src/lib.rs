//! Config-driven experiments on top of `yamabe_core`.
//!
//! Each run writes `<prefix>.json` (version, config hash, the exact
//! configuration, structured results) and `<prefix>.csv` (one row per node,
//! eigenvalue, sample or record) and prints a one-line summary.

pub mod config;
pub mod run;

pub use config::{load, validate_value, Diagnostic, Experiment, ExperimentConfig};
pub use run::{execute, report_json, run, Outcome, RunError};

//! Experiment harness over `hyptime-core`: JSON-configured runs of the
//! orbit analyses (time selection, block membership, manifold growth,
//! nesting, Monte Carlo block-measure sweeps, synthetic inputs) that emit
//! deterministic report bundles.
//!
//! The binary front end lives in `main.rs`; everything it does is driven
//! through [`run_experiment`] so tests and other tools can run experiments
//! in-process.
//!
//! Exit-code contract of the binary:
//! `0` all declared expectations hold, `1` some expectation failed,
//! `2` configuration or usage error, `3` runtime failure.

pub mod analyses;
pub mod config;
pub mod report;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{FrequencyEstimate, ReportWriter, WILSON_Z};
pub use runner::{apply_overrides, run_experiment, Overrides, RunOutcome};

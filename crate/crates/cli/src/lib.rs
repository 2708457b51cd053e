//! Experiment runner for the wave-map minimizers: single solves, ε-sweeps
//! with trend verdicts, and re-verification of stored fields.
//!
//! Exit codes: 0 all checks pass, 1 a bound or trend check failed, 2 bad
//! config or unreadable input, 3 the minimizer did not converge.

pub mod artifacts;
pub mod config;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_single, run_sweep, verify, RunError, Status};

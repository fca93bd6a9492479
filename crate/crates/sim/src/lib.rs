//! Scenario simulation, Monte-Carlo evaluation and CSV output for the LMB,
//! δ-GLMB and adaptive LMB trackers.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod truth;

pub use config::ScenarioConfig;
pub use error::{Result, SimError};
pub use runner::{monte_carlo, run_filter, run_once, FilterKind, RunOptions, StepRecord};
pub use truth::{generate_measurements, generate_truth, GroundTruth};

//! Driver for the two-phase pipeline: `extract` runs the CNN once and
//! persists the feature matrix, `evaluate` cross-validates SVMs on it and
//! `report` summarises the resulting JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod features_io;

pub use commands::{cmd_evaluate, cmd_extract, cmd_report};
pub use config::{KernelName, Overrides, PipelineConfig, WeightsSource};
pub use error::CliError;

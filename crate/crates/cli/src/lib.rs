//! Batch pipeline around `lstm-evt-core`: split, train, errors, detect,
//! test, evaluate and report, each reading and writing plain CSV/JSON
//! artifacts in one directory.

pub mod args;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod labels;
pub mod stages;

pub use config::PipelineConfig;
pub use error::{CliError, Stage};

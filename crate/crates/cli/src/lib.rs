//! Batch experiment harness for `disttest-core`: seeded runs of every
//! module, CSV reports, and the acceptance suite.

pub mod acceptance;
pub mod batch;
pub mod commands;
pub mod record;

pub use batch::{run_batch, ExperimentConfig};
pub use record::{write_report, RunRecord};

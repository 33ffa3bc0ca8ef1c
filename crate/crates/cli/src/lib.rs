//! Experiment driver for the `wmpot` domain adaptation library: data generation, curriculum
//! reports, adaptation runs and ablations over seeded benchmarks.

pub mod commands;
pub mod config;
pub mod data;
pub mod methods;
pub mod report;

pub use commands::{Arm, Options};
pub use config::{ExperimentConfig, Method};

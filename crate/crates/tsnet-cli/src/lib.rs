//! Benchmark driver around `tsnet-core`: dataset generation with GA
//! labeling, network training, method evaluation with CSV reports, and
//! single-instance solving. Everything is deterministic per config
//! seed; parallel batch work preserves result order.

#![forbid(unsafe_code)]

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod training;

pub use error::{CliError, CliResult};

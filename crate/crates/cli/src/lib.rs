//! File formats and experiment orchestration on top of `robust-pll-core`.
//!
//! - [`idx`]: MNIST-family IDX images and labels.
//! - [`pll_file`]: the `RPLL1` text dataset format.
//! - [`checkpoint`]: `RPLLMDL1` model files.
//! - [`config`]: flat `key = value` experiment configs.
//! - [`report`]: JSON-lines reports and mean ± std aggregation.
//! - [`commands`]: what the `robust-pll` binary runs.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod idx;
pub mod pll_file;
pub mod report;

pub use config::{ExperimentConfig, Method};
pub use error::{CliError, Result};

//! Batch driver for the structpop solvers: reads a JSON run configuration,
//! runs the spectral and renewal pipelines and writes JSON and CSV products.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{InitialConfig, OutputConfig, RunConfig, SpectralConfig, SweepConfig, VerifyConfig};
pub use error::CliError;
pub use report::ConvergenceReport;

use serde::Serialize;

/// Everything needed to rerun a command: the resolved configuration with
/// all defaults filled in.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Self { command, version: env!("CARGO_PKG_VERSION"), config }
    }
}

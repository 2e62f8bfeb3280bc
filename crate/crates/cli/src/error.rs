use std::path::{Path, PathBuf};

use structpop::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model violates {}", .0.join(", "))]
    Assumptions(Vec<String>),
    #[error("checks failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 0 pass, 1 i/o, 2 validation, 3 numerical instability, 4 non-convergence
    /// or failed checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Assumptions(_) => 2,
            CliError::ChecksFailed(_) => 4,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                Error::Instability { .. } => 3,
                Error::NonConvergence { .. }
                | Error::DegenerateSpectrum(_)
                | Error::NoGrowthRate(_)
                | Error::InsufficientHorizon(_) => 4,
                Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
                _ => 2,
            },
        }
    }

    pub fn advice(&self) -> Option<&'static str> {
        match self {
            CliError::Core(Error::Instability { .. }) => {
                Some("reduce sim.dt, or raise sim.blowup_factor if the growth is genuine")
            }
            CliError::Core(Error::InsufficientHorizon(_)) => Some("raise sim.t_final or lower output.stride"),
            CliError::Core(Error::NoGrowthRate(_)) => Some("the model may decay faster than its z0 bound allows"),
            CliError::Core(Error::NonConvergence { .. }) => Some("raise spectral.solver.power.max_iter"),
            _ => None,
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measures live on different grids")]
    GridMismatch,
    #[error("location {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("trajectory leaves the state domain at time {time}")]
    DomainExit { time: f64 },
    #[error("travel from {from} to {to} runs against the flow")]
    Orientation { from: f64, to: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("no root of rho(K_lambda) = 1: {0}")]
    NoGrowthRate(String),
    #[error("numerical instability at t = {time}: {detail}")]
    Instability { time: f64, detail: String },
    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

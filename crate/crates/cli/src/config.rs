use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use structpop::spectral::SpectralOptions;
use structpop::{Atom, GridConfig, HybridMeasure, ModelSpec, RateFn, SimConfig};

use crate::CliError;

/// One JSON document describing a run. Every section but `model` is
/// optional and falls back to the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Initial population: atoms plus an optional density profile evaluated at
/// the state grid nodes inside `support`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub atoms: Vec<Atom>,
    pub density: Option<RateFn>,
    pub support: Option<(f64, f64)>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { atoms: vec![Atom { location: 1.0, mass: 1.0 }], density: None, support: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub solver: SpectralOptions,
    /// Explicit sample points for the rho curve. When absent, `lambda_points`
    /// points are spread over `r -/+ lambda_span`, kept above the decay bound.
    pub lambdas: Option<Vec<f64>>,
    pub lambda_points: usize,
    pub lambda_span: f64,
    /// Age tail dropped when building the stable population.
    pub stable_tail_tol: f64,
    /// Sample count for the model assumption checks.
    pub validation_samples: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            solver: SpectralOptions::default(),
            lambdas: None,
            lambda_points: 15,
            lambda_span: 1.0,
            stable_tail_tol: 1e-10,
            validation_samples: 200,
        }
    }
}

/// Late-window rule and pass thresholds for `verify`. A threshold set to
/// `null` disables its check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Fraction of the horizon at the end of the run used for fitting.
    pub window_fraction: f64,
    /// The window starts no earlier than this many multiples of `1/|z0|`.
    pub transient_units: f64,
    pub min_samples: usize,
    /// The fitted log-slope of the birth distance must lie below this.
    pub birth_slope: Option<f64>,
    /// Largest relative birth distance at the final time.
    pub birth_final: Option<f64>,
    /// The fitted log-slope of the population distance must lie below this.
    pub population_slope: Option<f64>,
    /// Require the population distance to be nonincreasing over the window.
    pub population_monotone: bool,
    /// Largest relative variation of `exp(-r t) |B(t)|` over the window.
    pub mass_variation: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            window_fraction: 0.4,
            transient_units: 5.0,
            min_samples: 10,
            birth_slope: Some(-0.05),
            birth_final: Some(0.05),
            population_slope: Some(0.0),
            population_monotone: true,
            mass_variation: None,
        }
    }
}

/// Constant mortality levels visited by `sweep`, in increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub death: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { death: vec![0.0, 0.3, 0.6, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Steps between snapshots and between population samples.
    pub stride: usize,
    /// Also write reconstructed population snapshots in `simulate`.
    pub population: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stride: 100, population: true }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(what.to_string()));
        let positive = [
            ("sim.dt", self.sim.dt),
            ("sim.t_final", self.sim.t_final),
            ("sim.tail_tol", self.sim.tail_tol),
            ("sim.truncation_tol", self.sim.truncation_tol),
            ("spectral.solver.power.tol", self.spectral.solver.power.tol),
            ("spectral.solver.lambda_tol", self.spectral.solver.lambda_tol),
            ("spectral.lambda_span", self.spectral.lambda_span),
            ("spectral.stable_tail_tol", self.spectral.stable_tail_tol),
            ("verify.window_fraction", self.verify.window_fraction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if self.verify.window_fraction > 1.0 {
            return bad("verify.window_fraction must not exceed one");
        }
        if !(self.verify.transient_units.is_finite() && self.verify.transient_units >= 0.0) {
            return bad("verify.transient_units must be nonnegative");
        }
        for (name, v) in [("verify.birth_final", self.verify.birth_final), ("verify.mass_variation", self.verify.mass_variation)] {
            if v.is_some_and(|v| !(v.is_finite() && v > 0.0)) {
                return bad(&format!("{name} must be positive"));
            }
        }
        for (name, v) in [("verify.birth_slope", self.verify.birth_slope), ("verify.population_slope", self.verify.population_slope)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return bad(&format!("{name} must be finite"));
            }
        }
        if self.verify.min_samples < 2 {
            return bad("verify.min_samples must be at least two");
        }
        if self.spectral.lambdas.is_none() && self.spectral.lambda_points < 2 {
            return bad("spectral.lambda_points must be at least two");
        }
        if self.spectral.validation_samples < 2 {
            return bad("spectral.validation_samples must be at least two");
        }
        if self.output.stride == 0 {
            return bad("output.stride must be positive");
        }
        if self.sweep.death.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("sweep.death values must be nonnegative");
        }
        if self.sweep.death.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sweep.death must be strictly increasing");
        }
        Ok(())
    }
}

impl InitialConfig {
    pub fn measure(&self, grid: &std::sync::Arc<structpop::Grid>) -> structpop::Result<HybridMeasure> {
        if let Some(a) = self.atoms.iter().find(|a| !grid.contains(a.location)) {
            return Err(structpop::Error::OutOfDomain { x: a.location, lo: grid.x_lo(), hi: grid.x_hi() });
        }
        let (lo, hi) = self.support.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let density = match &self.density {
            Some(f) => grid.nodes().iter().map(|&x| if x >= lo && x <= hi { f.eval(x) } else { 0.0 }).collect(),
            None => vec![0.0; grid.len()],
        };
        HybridMeasure::new(grid.clone(), self.atoms.clone(), density)
    }
}

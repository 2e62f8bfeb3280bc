//! Numerical solution of measure-valued renewal equations for
//! physiologically structured populations: the discounted next-generation
//! operator and its spectrum, a time-stepping solver for the birth rate,
//! and reconstruction of the population state from the birth history.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod discretization;
pub mod error;
pub mod grid;
pub mod measure;
pub mod models;
pub mod profiles;
pub mod quadrature;
pub mod rates;
pub mod reconstruction;
pub mod renewal;
pub mod spectral;
pub mod validation;
mod walker;

pub use discretization::Discretization;
pub use error::{Error, Result};
pub use grid::{Grid, GridSpec, Spacing};
pub use measure::{distance, Atom, DensitySeries, DistanceMode, HybridMeasure, MeasureDistance};
pub use models::{GridConfig, ModelGrids, ModelKind, ModelSpec};
pub use profiles::{BoostingProfile, FragmentProfile, FragmentTable};
pub use rates::RateFn;
pub use renewal::{solve, BirthHistory, SimConfig};
pub use validation::ValidationReport;

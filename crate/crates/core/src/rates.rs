//! Scalar rate functions of the state variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RateFn {
    Constant { value: f64 },
    /// `intercept + slope * x`
    Linear { slope: f64, intercept: f64 },
    /// `max * x / (half + x)`
    Hill { max: f64, half: f64 },
    /// `scale / (shift + x)`
    Reciprocal { scale: f64, shift: f64 },
    /// Piecewise linear through the points, constant beyond the ends.
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

impl RateFn {
    pub fn constant(value: f64) -> Self {
        RateFn::Constant { value }
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        RateFn::Linear { slope, intercept }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateFn::Constant { value } => *value,
            RateFn::Linear { slope, intercept } => intercept + slope * x,
            RateFn::Hill { max, half } => max * x / (half + x),
            RateFn::Reciprocal { scale, shift } => scale / (shift + x),
            RateFn::Tabulated { x: xs, y: ys } => {
                if x <= xs[0] {
                    return ys[0];
                }
                let n = xs.len();
                if x >= xs[n - 1] {
                    return ys[n - 1];
                }
                let k = xs.partition_point(|&t| t <= x) - 1;
                let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
                ys[k] + s * (ys[k + 1] - ys[k])
            }
        }
    }

    /// Limit as `x -> infinity`, when it exists and is finite.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        match self {
            RateFn::Constant { value } => Some(*value),
            RateFn::Linear { slope, intercept } => (*slope == 0.0).then_some(*intercept),
            RateFn::Hill { max, .. } => Some(*max),
            RateFn::Reciprocal { .. } => Some(0.0),
            RateFn::Tabulated { y, .. } => y.last().copied(),
        }
    }

    /// Points where the function is not smooth.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            RateFn::Tabulated { x, .. } => x,
            _ => &[],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RateFn::Constant { .. }) || matches!(self, RateFn::Linear { slope, .. } if *slope == 0.0)
    }

    pub(crate) fn check(&self, name: &str) -> Result<()> {
        let finite = |v: &f64| v.is_finite();
        let ok = match self {
            RateFn::Constant { value } => finite(value),
            RateFn::Linear { slope, intercept } => finite(slope) && finite(intercept),
            RateFn::Hill { max, half } => finite(max) && finite(half) && *half > 0.0,
            RateFn::Reciprocal { scale, shift } => finite(scale) && finite(shift) && *shift >= 0.0,
            RateFn::Tabulated { x, y } => {
                !x.is_empty()
                    && x.len() == y.len()
                    && x.iter().all(finite)
                    && y.iter().all(finite)
                    && x.windows(2).all(|w| w[1] > w[0])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("malformed rate function for {name}")))
        }
    }
}

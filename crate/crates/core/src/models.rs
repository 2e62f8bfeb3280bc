//! Model specifications: growth, mortality, event rate and offspring law.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Spacing};
use crate::measure::{Atom, HybridMeasure};
use crate::profiles::{BoostingProfile, FragmentProfile};
use crate::quadrature::{gl8, integrate_adaptive};
use crate::rates::RateFn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Binary fission into unequal parts with fragment density `p`.
    UnequalFission { fragment: FragmentProfile },
    /// Binary fission into two equal halves.
    EqualFission,
    /// Waning immunity (`g < 0`) with boosting `x -> f(x)` at rate `gamma`.
    WaningBoosting { profile: BoostingProfile },
}

/// Open lower end, closed upper end; `hi` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "infinite_as_null")]
    pub hi: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x <= self.hi
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub growth: RateFn,
    #[serde(default = "no_mortality")]
    pub death: RateFn,
    pub event_rate: RateFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_bound: Option<f64>,
}

fn no_mortality() -> RateFn {
    RateFn::constant(0.0)
}

/// A fully specified model. Construct through [`ModelSpec::new`] or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ModelSpec {
    kind: ModelKind,
    growth: RateFn,
    death: RateFn,
    event_rate: RateFn,
    z0_bound: f64,
}

impl TryFrom<ModelConfig> for ModelSpec {
    type Error = Error;

    fn try_from(c: ModelConfig) -> Result<Self> {
        ModelSpec::with_bound(c.kind, c.growth, c.death, c.event_rate, c.z0_bound)
    }
}

impl From<ModelSpec> for ModelConfig {
    fn from(m: ModelSpec) -> Self {
        ModelConfig {
            kind: m.kind,
            growth: m.growth,
            death: m.death,
            event_rate: m.event_rate,
            z0_bound: Some(m.z0_bound),
        }
    }
}

/// Truncation of the state and birth domains onto finite grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n_cells: usize,
    pub x_lo: f64,
    /// Upper truncation; defaults to 20 for fission and to `M` for boosting.
    pub x_hi: Option<f64>,
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_cells: 400, x_lo: 1e-3, x_hi: None, spacing: Spacing::Uniform }
    }
}

/// Grid for individual states and grid for birth states.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrids {
    pub state: Arc<Grid>,
    pub birth: Arc<Grid>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, growth: RateFn, death: RateFn, event_rate: RateFn) -> Result<Self> {
        Self::with_bound(kind, growth, death, event_rate, None)
    }

    pub fn with_bound(
        kind: ModelKind,
        growth: RateFn,
        death: RateFn,
        event_rate: RateFn,
        z0_bound: Option<f64>,
    ) -> Result<Self> {
        growth.check("growth")?;
        death.check("death")?;
        event_rate.check("event rate")?;
        let natural = match &kind {
            ModelKind::WaningBoosting { profile } => {
                profile.check()?;
                let RateFn::Constant { value: gamma } = event_rate else {
                    return Err(Error::InvalidModel("boosting needs a constant event rate".into()));
                };
                if gamma <= 0.0 {
                    return Err(Error::InvalidModel("boosting rate must be positive".into()));
                }
                Some(-gamma)
            }
            _ => event_rate.limit_at_infinity().filter(|&l| l > 0.0).map(|l| -l),
        };
        // An explicit bound stands in for the limit of the event rate.
        let z0_bound = match (z0_bound, natural) {
            (Some(z), _) | (None, Some(z)) => z,
            (None, None) => {
                return Err(Error::InvalidModel("fission needs an event rate with a finite positive limit".into()))
            }
        };
        if !(z0_bound.is_finite() && z0_bound < 0.0) {
            return Err(Error::InvalidModel(format!("z0 bound {z0_bound} must be negative")));
        }
        Ok(Self { kind, growth, death, event_rate, z0_bound })
    }

    /// Unequal fission with constant growth, no mortality and the given rate.
    pub fn unequal_fission(fragment: FragmentProfile, growth: RateFn, death: RateFn, event_rate: RateFn) -> Result<Self> {
        Self::new(ModelKind::UnequalFission { fragment }, growth, death, event_rate)
    }

    pub fn equal_fission(growth: RateFn, death: RateFn, event_rate: RateFn) -> Result<Self> {
        Self::new(ModelKind::EqualFission, growth, death, event_rate)
    }

    /// Waning-boosting with `g = -slope * x`.
    pub fn waning_boosting(profile: BoostingProfile, waning: f64, gamma: f64, death: RateFn) -> Result<Self> {
        Self::new(
            ModelKind::WaningBoosting { profile },
            RateFn::linear(-waning, 0.0),
            death,
            RateFn::constant(gamma),
        )
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn growth(&self) -> &RateFn {
        &self.growth
    }

    pub fn death(&self) -> &RateFn {
        &self.death
    }

    pub fn event_rate(&self) -> &RateFn {
        &self.event_rate
    }

    pub fn z0_bound(&self) -> f64 {
        self.z0_bound
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::UnequalFission { .. } => "unequal_fission",
            ModelKind::EqualFission => "equal_fission",
            ModelKind::WaningBoosting { .. } => "waning_boosting",
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        self.growth.eval(x)
    }

    pub fn mu(&self, x: f64) -> f64 {
        self.death.eval(x)
    }

    pub fn lambda(&self, x: f64) -> f64 {
        self.event_rate.eval(x)
    }

    /// Total exit rate `mu + Lambda`.
    pub fn exit_rate(&self, x: f64) -> f64 {
        self.mu(x) + self.lambda(x)
    }

    /// Growth direction: `true` when individuals grow.
    pub fn grows(&self) -> bool {
        !matches!(self.kind, ModelKind::WaningBoosting { .. })
    }

    pub fn state_domain(&self) -> Interval {
        match &self.kind {
            ModelKind::WaningBoosting { profile } => Interval { lo: 0.0, hi: profile.big_m },
            _ => Interval { lo: 0.0, hi: f64::INFINITY },
        }
    }

    pub fn birth_domain(&self) -> Interval {
        match &self.kind {
            ModelKind::WaningBoosting { profile } => Interval { lo: profile.m, hi: profile.big_m },
            _ => Interval { lo: 0.0, hi: f64::INFINITY },
        }
    }

    /// Whether offspring states are atoms, as opposed to a density.
    pub fn offspring_is_atomic(&self) -> bool {
        !matches!(self.kind, ModelKind::UnequalFission { .. })
    }

    /// Location and multiplicity of the offspring atom of a parent at `y`.
    pub fn offspring_atom(&self, y: f64) -> Option<(f64, f64)> {
        match &self.kind {
            ModelKind::EqualFission => Some((0.5 * y, 2.0)),
            ModelKind::WaningBoosting { profile } => Some((profile.apply(y), 1.0)),
            ModelKind::UnequalFission { .. } => None,
        }
    }

    /// Expected offspring of a parent at `y` with state in `[a, b)`.
    pub fn offspring_in(&self, y: f64, a: f64, b: f64) -> f64 {
        match &self.kind {
            ModelKind::UnequalFission { fragment } => fragment.daughters_in(y, a, b),
            _ => {
                let (x, beta) = self.offspring_atom(y).unwrap();
                if x >= a && x < b {
                    beta
                } else {
                    0.0
                }
            }
        }
    }

    /// Expected offspring of a parent at `y` landing in each cell of `grid`.
    /// Offspring below the grid are folded into the first cell.
    pub fn offspring_cells(&self, y: f64, grid: &Grid, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.kind {
            ModelKind::UnequalFission { fragment } => {
                let e = grid.edges();
                let mut prev = 0.0;
                for (i, o) in out.iter_mut().enumerate() {
                    if e[i] >= y {
                        break;
                    }
                    let c = fragment.cdf(e[i + 1] / y);
                    *o = 2.0 * (c - prev);
                    prev = c;
                }
            }
            _ => {
                let (x, beta) = self.offspring_atom(y).unwrap();
                if x <= grid.x_hi() {
                    out[grid.cell_of_clamped(x)] = beta;
                }
            }
        }
    }

    /// Parent states whose offspring sit exactly at `x`; for a density law,
    /// the parent sizes at which `h(., x)` changes regime.
    pub fn offspring_preimages(&self, x: f64) -> Vec<f64> {
        match &self.kind {
            ModelKind::EqualFission => vec![2.0 * x],
            ModelKind::WaningBoosting { profile } => profile.preimages(x),
            ModelKind::UnequalFission { fragment } => {
                fragment.knots().iter().filter(|u| **u > 0.0).map(|u| x / u).collect()
            }
        }
    }

    /// Non-smooth points of the coefficients and of the offspring map.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = [&self.growth, &self.death, &self.event_rate]
            .iter()
            .flat_map(|r| r.breakpoints().iter().copied())
            .collect();
        if let ModelKind::WaningBoosting { profile } = &self.kind {
            b.push(profile.x_c);
        }
        b
    }

    pub fn grids(&self, cfg: &GridConfig) -> Result<ModelGrids> {
        let n = cfg.n_cells;
        match &self.kind {
            ModelKind::WaningBoosting { profile } => {
                let hi = profile.big_m;
                if let Some(h) = cfg.x_hi {
                    if (h - hi).abs() > 1e-12 * hi {
                        return Err(Error::InvalidConfig(format!("boosting grid must end at M = {hi}")));
                    }
                }
                if cfg.x_lo >= profile.m {
                    return Err(Error::InvalidConfig("boosting grid must start below m".into()));
                }
                let state = Grid::new(cfg.x_lo, hi, n, cfg.spacing)?;
                let birth = Grid::new(profile.m, hi, n, cfg.spacing)?;
                Ok(ModelGrids { state: Arc::new(state), birth: Arc::new(birth) })
            }
            ModelKind::EqualFission => {
                let hi = cfg.x_hi.unwrap_or(20.0);
                let state = Grid::new(cfg.x_lo, hi, n, cfg.spacing)?;
                let birth = Grid::new(cfg.x_lo, 0.5 * hi, n, cfg.spacing)?;
                Ok(ModelGrids { state: Arc::new(state), birth: Arc::new(birth) })
            }
            ModelKind::UnequalFission { .. } => {
                let hi = cfg.x_hi.unwrap_or(20.0);
                let g = Arc::new(Grid::new(cfg.x_lo, hi, n, cfg.spacing)?);
                Ok(ModelGrids { state: g.clone(), birth: g })
            }
        }
    }

    /// State reached after time `a` from `xi`, by adaptive Runge-Kutta.
    pub fn flow(&self, a: f64, xi: f64) -> Result<f64> {
        Ok(self.integrate_characteristic(a, xi)?.0)
    }

    /// Probability of no death and no event during `[0, t]` from `xi`.
    pub fn survival(&self, t: f64, xi: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidModel("survival needs t >= 0".into()));
        }
        Ok((-self.integrate_characteristic(t, xi)?.1).exp())
    }

    /// Time to grow (or wane) from `x` to `y`.
    pub fn travel_time(&self, x: f64, y: f64) -> Result<f64> {
        if x == y {
            return Ok(0.0);
        }
        let gx = self.g(x);
        if (y - x) * gx <= 0.0 || (y - x) * self.g(y) <= 0.0 {
            return Err(Error::Orientation { from: x, to: y });
        }
        Ok(self.size_integral(x, y, |_| 1.0))
    }

    /// Survival between sizes `y` and `z` along one characteristic.
    pub fn survival_between(&self, y: f64, z: f64) -> Result<f64> {
        if y != z && (z - y) * self.g(y) <= 0.0 {
            return Err(Error::Orientation { from: y, to: z });
        }
        Ok((-self.size_integral(y, z, |s| self.exit_rate(s))).exp())
    }

    /// `int_y^z w(s) / g(s) ds`, split at the breakpoints.
    fn size_integral<W: Fn(f64) -> f64>(&self, y: f64, z: f64, w: W) -> f64 {
        let (a, b, sign) = if y < z { (y, z, 1.0) } else { (z, y, -1.0) };
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|&p| p > a && p < b));
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let f = |s: f64| w(s) / self.g(s);
        sign * cuts.windows(2).map(|c| integrate_adaptive(f, c[0], c[1], 1e-14)).sum::<f64>()
    }

    /// Integrates `x' = g(x)` and `L' = mu(x) + Lambda(x)` for time `t`.
    fn integrate_characteristic(&self, t: f64, xi: f64) -> Result<(f64, f64)> {
        let domain = self.state_domain();
        if !domain.contains(xi) {
            return Err(Error::DomainExit { time: 0.0 });
        }
        if t == 0.0 {
            return Ok((xi, 0.0));
        }
        let rhs = |x: f64| [self.g(x), self.exit_rate(x)];
        let dir = t.signum();
        let mut s = 0.0f64;
        let mut y = [xi, 0.0];
        let mut h = dir * t.abs().min(1e-2);
        let (rtol, atol) = (1e-12, 1e-14);
        for _ in 0..10_000_000 {
            let rest = t - s;
            if rest * dir <= 0.0 {
                return Ok((y[0], y[1]));
            }
            if (h * dir) > (rest * dir) {
                h = rest;
            }
            let (next, err) = dopri_step(&rhs, y, h);
            let scale = |i: usize| atol + rtol * y[i].abs().max(next[i].abs());
            let e = (err[0] / scale(0)).abs().max((err[1] / scale(1)).abs());
            if !next[0].is_finite() || !domain.contains(next[0]) {
                if h.abs() < 1e-13 * (1.0 + s.abs()) {
                    return Err(Error::DomainExit { time: s });
                }
                h *= 0.5;
                continue;
            }
            if e <= 1.0 {
                s += h;
                y = next;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
        Err(Error::NonConvergence { what: "characteristic integration".into(), iterations: 10_000_000 })
    }

    /// Offspring measure `K(a, xi, .)` on `grid`.
    pub fn kernel_measure(&self, a: f64, xi: f64, grid: &Arc<Grid>) -> Result<HybridMeasure> {
        if a < 0.0 {
            return Err(Error::InvalidModel("kernel needs a >= 0".into()));
        }
        let (z, log_surv) = self.integrate_characteristic(a, xi)?;
        let weight = (-log_surv).exp() * self.lambda(z);
        if let Some((x, beta)) = self.offspring_atom(z) {
            if x > grid.x_hi() {
                return Ok(HybridMeasure::zero(grid.clone()));
            }
            let location = x.max(grid.x_lo());
            return HybridMeasure::from_atoms(grid.clone(), vec![Atom { location, mass: weight * beta }]);
        }
        let mut cells = vec![0.0; grid.len()];
        self.offspring_cells(z, grid, &mut cells);
        let masses: Vec<f64> = cells.iter().map(|c| c * weight).collect();
        Ok(HybridMeasure::from_cell_masses_unchecked(grid.clone(), Vec::new(), &masses))
    }

    /// Checks the standing assumptions on `[lo, hi]` at `samples` points.
    pub fn validate(&self, lo: f64, hi: f64, samples: usize) -> ValidationReport {
        crate::validation::validate(self, lo, hi, samples.max(2))
    }
}

pub use crate::validation::{Check, Severity, ValidationReport};

fn dopri_step<F: Fn(f64) -> [f64; 2]>(f: &F, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    // Dormand-Prince 5(4); the system is autonomous and the rates depend on x only.
    let k1 = f(y[0]);
    let k2 = f(y[0] + h * (k1[0] / 5.0));
    let k3 = f(y[0] + h * (3.0 / 40.0 * k1[0] + 9.0 / 40.0 * k2[0]));
    let k4 = f(y[0] + h * (44.0 / 45.0 * k1[0] - 56.0 / 15.0 * k2[0] + 32.0 / 9.0 * k3[0]));
    let k5 = f(y[0]
        + h * (19372.0 / 6561.0 * k1[0] - 25360.0 / 2187.0 * k2[0] + 64448.0 / 6561.0 * k3[0]
            - 212.0 / 729.0 * k4[0]));
    let k6 = f(y[0]
        + h * (9017.0 / 3168.0 * k1[0] - 355.0 / 33.0 * k2[0] + 46732.0 / 5247.0 * k3[0] + 49.0 / 176.0 * k4[0]
            - 5103.0 / 18656.0 * k5[0]));
    let b = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
    let k = [k1, k2, k3, k4, k5, k6];
    let mut next = y;
    for c in 0..2 {
        next[c] += h * (0..6).map(|i| b[i] * k[i][c]).sum::<f64>();
    }
    let k7 = f(next[0]);
    let bs = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut err = [0.0; 2];
    for c in 0..2 {
        let lower: f64 = (0..6).map(|i| bs[i] * k[i][c]).sum::<f64>() + bs[6] * k7[c];
        let upper: f64 = (0..6).map(|i| b[i] * k[i][c]).sum();
        err[c] = h * (upper - lower);
    }
    (next, err)
}

/// Integral of `h(y, .)` and of `x h(y, .)`, by Gauss rules between knots.
pub(crate) fn fragment_moments(fragment: &FragmentProfile) -> (f64, f64) {
    let knots = fragment.knots();
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for k in knots.windows(2) {
        for (u, w) in gl8().points(k[0], k[1]) {
            m0 += w * fragment.pdf(u);
            m1 += w * u * fragment.pdf(u);
        }
    }
    (2.0 * m0, 2.0 * m1)
}

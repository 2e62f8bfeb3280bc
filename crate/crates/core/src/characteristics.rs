//! Tabulated age and hazard coordinates along the characteristic curves.
//!
//! `T(z) = int 1/g` and `H(z) = int (mu + Lambda)/g` are tabulated on a fine
//! mesh and interpolated by cubic Hermite polynomials with exact slopes.
//! Travel times, survival probabilities and the flow map then reduce to
//! differences and inversions of these two coordinates.

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::quadrature::gl8;

#[derive(Clone, Debug)]
pub struct Characteristics {
    z: Vec<f64>,
    t: Vec<f64>,
    dt: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    grows: bool,
}

const GEOMETRIC_RATIO: f64 = 4e-4;
const UNIFORM_NODES: usize = 20_000;

impl Characteristics {
    pub fn new(model: &ModelSpec, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad characteristic range [{lo}, {hi}]")));
        }
        let mut z: Vec<f64> = if lo > 0.0 && hi / lo > 20.0 {
            let n = ((hi / lo).ln() / GEOMETRIC_RATIO.ln_1p()).ceil() as usize;
            (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect()
        } else {
            (0..=UNIFORM_NODES).map(|k| lo + (hi - lo) * k as f64 / UNIFORM_NODES as f64).collect()
        };
        z[0] = lo;
        *z.last_mut().unwrap() = hi;
        z.extend(model.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
        z.sort_by(f64::total_cmp);
        z.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs().max(1.0));

        let grows = model.grows();
        let inv_g = |x: f64| 1.0 / model.g(x);
        let dt: Vec<f64> = z.iter().map(|&x| inv_g(x)).collect();
        if dt.iter().any(|v| !v.is_finite() || (*v > 0.0) != grows) {
            return Err(Error::InvalidModel("growth rate vanishes or changes sign on the grid".into()));
        }
        let dh: Vec<f64> = z.iter().map(|&x| model.exit_rate(x) * inv_g(x)).collect();
        let mut t = vec![0.0; z.len()];
        let mut h = vec![0.0; z.len()];
        let (mut ct, mut ch) = (0.0, 0.0);
        for k in 1..z.len() {
            let (a, b) = (z[k - 1], z[k]);
            let it = gl8().integrate(a, b, inv_g);
            let ih = gl8().integrate(a, b, |x| model.exit_rate(x) * inv_g(x));
            // Compensated summation keeps the coordinates accurate over long paths.
            let y = it - ct;
            let s = t[k - 1] + y;
            ct = (s - t[k - 1]) - y;
            t[k] = s;
            let y = ih - ch;
            let s = h[k - 1] + y;
            ch = (s - h[k - 1]) - y;
            h[k] = s;
        }
        Ok(Self { z, t, dt, h, dh, grows })
    }

    pub fn lo(&self) -> f64 {
        self.z[0]
    }

    pub fn hi(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    pub fn grows(&self) -> bool {
        self.grows
    }

    /// Boundary point that characteristics run into.
    pub fn end(&self) -> f64 {
        if self.grows {
            self.hi()
        } else {
            self.lo()
        }
    }

    fn segment(&self, x: f64) -> usize {
        (self.z.partition_point(|&v| v <= x).max(1) - 1).min(self.z.len() - 2)
    }

    fn hermite(&self, k: usize, x: f64, v: &[f64], d: &[f64]) -> f64 {
        let w = self.z[k + 1] - self.z[k];
        let s = (x - self.z[k]) / w;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * v[k]
            + (s3 - 2.0 * s2 + s) * w * d[k]
            + (-2.0 * s3 + 3.0 * s2) * v[k + 1]
            + (s3 - s2) * w * d[k + 1]
    }

    fn hermite_slope(&self, k: usize, x: f64, v: &[f64], d: &[f64]) -> f64 {
        let w = self.z[k + 1] - self.z[k];
        let s = (x - self.z[k]) / w;
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * v[k] + (-6.0 * s2 + 6.0 * s) * v[k + 1]) / w
            + (3.0 * s2 - 4.0 * s + 1.0) * d[k]
            + (3.0 * s2 - 2.0 * s) * d[k + 1]
    }

    /// Age and cumulative hazard coordinates `(T(x), H(x))`.
    pub fn coords(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(self.lo(), self.hi());
        let k = self.segment(x);
        (self.hermite(k, x, &self.t, &self.dt), self.hermite(k, x, &self.h, &self.dh))
    }

    pub fn time_coord(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo(), self.hi());
        self.hermite(self.segment(x), x, &self.t, &self.dt)
    }

    /// Age at which a characteristic from `y` reaches `z`.
    pub fn age(&self, y: f64, z: f64) -> f64 {
        self.time_coord(z) - self.time_coord(y)
    }

    /// Survival from `y` to `z` along the flow.
    pub fn survival(&self, y: f64, z: f64) -> f64 {
        (-(self.coords(z).1 - self.coords(y).1)).exp()
    }

    /// Age at which a characteristic from `y` leaves the tabulated range.
    pub fn age_to_end(&self, y: f64) -> f64 {
        self.age(y, self.end())
    }

    /// `X(a, y)`, or `None` once the characteristic leaves the range.
    pub fn advance(&self, y: f64, a: f64) -> Option<f64> {
        if a == 0.0 && y >= self.lo() && y <= self.hi() {
            return Some(y);
        }
        self.invert_time(self.time_coord(y) + a)
    }

    /// Point `z` with `T(z) = target`.
    pub fn invert_time(&self, target: f64) -> Option<f64> {
        let sgn = if self.grows { 1.0 } else { -1.0 };
        let key = sgn * target;
        let n = self.z.len();
        let (first, last) = (sgn * self.t[0], sgn * self.t[n - 1]);
        let slack = 1e-12 * (1.0 + key.abs());
        if key < first - slack || key > last + slack {
            return None;
        }
        if key <= first {
            return Some(self.z[0]);
        }
        if key >= last {
            return Some(self.z[n - 1]);
        }
        let k = (self.t.partition_point(|&v| sgn * v <= key).max(1) - 1).min(n - 2);
        let (mut a, mut b) = (self.z[k], self.z[k + 1]);
        let f = |x: f64| sgn * (self.hermite(k, x, &self.t, &self.dt) - target);
        let span = sgn * (self.t[k + 1] - self.t[k]);
        let mut x = a + (b - a) * ((key - sgn * self.t[k]) / span).clamp(0.0, 1.0);
        for _ in 0..60 {
            let fx = f(x);
            if fx == 0.0 {
                break;
            }
            if fx > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let slope = sgn * self.hermite_slope(k, x, &self.t, &self.dt);
            let mut next = x - fx / slope;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        Some(x)
    }
}

//! Fragment profiles and the boosting map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise linear fragment density on `[0, 1]`, normalised on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct FragmentTable {
    z: Vec<f64>,
    p: Vec<f64>,
    cum: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawTable {
    z: Vec<f64>,
    p: Vec<f64>,
}

impl From<FragmentTable> for RawTable {
    fn from(t: FragmentTable) -> Self {
        RawTable { z: t.z, p: t.p }
    }
}

impl TryFrom<RawTable> for FragmentTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        FragmentTable::new(raw.z, raw.p)
    }
}

impl FragmentTable {
    pub fn new(z: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidModel(format!("fragment table: {msg}")));
        if z.len() < 2 || z.len() != p.len() {
            return bad("needs at least two matching points");
        }
        if z[0] != 0.0 || z[z.len() - 1] != 1.0 || z.windows(2).any(|w| w[1] <= w[0]) {
            return bad("abscissae must increase from 0 to 1");
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("density must be finite and nonnegative");
        }
        let mut cum = vec![0.0; z.len()];
        for k in 1..z.len() {
            cum[k] = cum[k - 1] + 0.5 * (p[k] + p[k - 1]) * (z[k] - z[k - 1]);
        }
        let total = cum[z.len() - 1];
        if (total - 1.0).abs() > 1e-6 {
            return bad(&format!("integrates to {total}, not 1"));
        }
        let p: Vec<f64> = p.iter().map(|v| v / total).collect();
        let cum = cum.iter().map(|c| c / total).collect();
        let t = FragmentTable { z, p, cum };
        let sup = t.p.iter().cloned().fold(0.0, f64::max);
        for &u in &t.z {
            if (t.pdf(u) - t.pdf(1.0 - u)).abs() > 1e-6 * sup {
                return bad("density is not symmetric about 1/2");
            }
        }
        Ok(t)
    }

    pub fn knots(&self) -> &[f64] {
        &self.z
    }

    fn segment(&self, u: f64) -> usize {
        (self.z.partition_point(|&t| t <= u).max(1) - 1).min(self.z.len() - 2)
    }

    pub fn pdf(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let k = self.segment(u);
        let s = (u - self.z[k]) / (self.z[k + 1] - self.z[k]);
        self.p[k] + s * (self.p[k + 1] - self.p[k])
    }

    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let k = self.segment(u);
        let h = self.z[k + 1] - self.z[k];
        let d = u - self.z[k];
        self.cum[k] + self.p[k] * d + 0.5 * (self.p[k + 1] - self.p[k]) / h * d * d
    }

    pub fn sup(&self) -> f64 {
        self.p.iter().cloned().fold(0.0, f64::max)
    }
}

/// Density `p` of the relative fragment size for binary fission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum FragmentProfile {
    /// `p = 1`
    Uniform,
    /// `p = 6 z (1 - z)`
    Parabolic,
    Tabulated(FragmentTable),
}

impl FragmentProfile {
    pub fn pdf(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            FragmentProfile::Uniform => 1.0,
            FragmentProfile::Parabolic => 6.0 * u * (1.0 - u),
            FragmentProfile::Tabulated(t) => t.pdf(u),
        }
    }

    pub fn cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            FragmentProfile::Uniform => u,
            FragmentProfile::Parabolic => u * u * (3.0 - 2.0 * u),
            FragmentProfile::Tabulated(t) => t.cdf(u),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            FragmentProfile::Uniform => 1.0,
            FragmentProfile::Parabolic => 1.5,
            FragmentProfile::Tabulated(t) => t.sup(),
        }
    }

    /// Points of `[0, 1]` where `p` is not smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            FragmentProfile::Tabulated(t) => t.knots().to_vec(),
            _ => vec![0.0, 1.0],
        }
    }

    /// Expected number of daughters with size in `[a, b]` from a parent of
    /// size `y`, i.e. the integral of `h(y, x) = (2/y) p(x/y)` over `[a, b]`.
    pub fn daughters_in(&self, y: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        2.0 * (self.cdf(b / y) - self.cdf(a / y))
    }
}

/// Piecewise linear boosting map `f` on `(0, M]`: decreasing from `r` to `m`
/// on `(0, x_c]`, then increasing from `m` to `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostingProfile {
    pub m: f64,
    pub r: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub x_c: f64,
}

impl Default for BoostingProfile {
    fn default() -> Self {
        Self { m: 1.0, r: 3.0, big_m: 10.0, x_c: 2.0 }
    }
}

impl BoostingProfile {
    pub fn check(&self) -> Result<()> {
        let BoostingProfile { m, r, big_m, x_c } = *self;
        let ok = [m, r, big_m, x_c].iter().all(|v| v.is_finite())
            && 0.0 < m
            && m < r
            && r < big_m
            && 0.0 < x_c
            && x_c < big_m;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("boosting profile needs 0 < m < r < M and 0 < x_c < M, got {self:?}")))
        }
    }

    pub fn alpha1(&self) -> f64 {
        (self.r - self.m) / self.x_c
    }

    pub fn alpha2(&self) -> f64 {
        (self.big_m - self.m) / (self.big_m - self.x_c)
    }

    pub fn q2(&self) -> f64 {
        self.m - self.x_c * self.alpha2()
    }

    pub fn apply(&self, x: f64) -> f64 {
        if x <= self.x_c {
            self.r - self.alpha1() * x
        } else {
            self.alpha2() * x + self.q2()
        }
    }

    /// Points of `(0, M]` mapped onto `z`.
    pub fn preimages(&self, z: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2);
        let y1 = (self.r - z) / self.alpha1();
        if y1 > 0.0 && y1 <= self.x_c {
            out.push(y1);
        }
        let y2 = (z - self.q2()) / self.alpha2();
        if y2 > self.x_c && y2 <= self.big_m {
            out.push(y2);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_profiles_are_probability_densities() {
        for p in [FragmentProfile::Uniform, FragmentProfile::Parabolic] {
            assert_eq!(p.cdf(1.0), 1.0);
            assert!((p.cdf(0.5) - 0.5).abs() < 1e-15);
            assert!((p.daughters_in(2.0, 0.0, 2.0) - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tabulated_profile_matches_its_cdf() {
        let t = FragmentTable::new(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert!((t.cdf(0.5) - 0.5).abs() < 1e-15);
        assert!((t.cdf(0.25) - 0.125).abs() < 1e-15);
        assert_eq!(t.pdf(0.25), 1.0);
        assert!(FragmentTable::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).is_err());
        assert!(FragmentTable::new(vec![0.0, 0.25, 1.0], vec![2.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn boosting_map_is_continuous() {
        let b = BoostingProfile::default();
        assert!((b.apply(b.x_c) - b.m).abs() < 1e-15);
        assert!((b.apply(b.big_m) - b.big_m).abs() < 1e-12);
        assert!((b.apply(0.0) - b.r).abs() < 1e-15);
        for z in [1.5, 2.5, 7.0] {
            for y in b.preimages(z) {
                assert!((b.apply(y) - z).abs() < 1e-12);
            }
        }
        assert_eq!(b.preimages(2.5).len(), 2);
        assert_eq!(b.preimages(5.0).len(), 1);
    }
}

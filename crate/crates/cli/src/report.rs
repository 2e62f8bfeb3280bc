use serde::Serialize;
use structpop::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    /// The last `fraction` of `[0, t_end]`, starting no earlier than
    /// `transient / |z0|`.
    pub fn late(t_end: f64, fraction: f64, transient: f64, z0: f64) -> Self {
        Self { start: (t_end * (1.0 - fraction)).max(transient / z0.abs()), end: t_end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - 1e-9 && t <= self.end + 1e-9
    }
}

/// Least-squares line through `(t, ln d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square deviation of `ln d` from the line.
    pub residual: f64,
    /// Standard error of the slope; zero for two points.
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn fit_log(samples: &[(f64, f64)]) -> Option<LogFit> {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|p| p.1 > 0.0 && p.1.is_finite()).map(|&(t, d)| (t, d.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if stt <= 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum::<f64>() / stt;
    let intercept = ym - slope * tm;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if pts.len() > 2 { (ss / (n - 2.0) / stt).sqrt() } else { 0.0 };
    Some(LogFit { slope, intercept, residual: (ss / n).sqrt(), slope_stderr, points: pts.len() })
}

/// Relative distances `(t, d)` of a scaled series to its limit, summarised
/// over the late window.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub window: Window,
    pub samples: usize,
    /// Absent when the distance vanishes on the window.
    pub fit: Option<LogFit>,
    pub final_relative: f64,
    pub max_relative: f64,
    pub monotone: bool,
    #[serde(skip)]
    pub series: Vec<(f64, f64)>,
}

impl SeriesSummary {
    pub fn new(series: Vec<(f64, f64)>, window: Window, min_samples: usize) -> Result<Self> {
        let late: Vec<(f64, f64)> = series.iter().copied().filter(|p| window.contains(p.0)).collect();
        if late.len() < min_samples {
            return Err(Error::InsufficientHorizon(format!(
                "{} samples in the fit window [{}, {}], need {min_samples}",
                late.len(),
                window.start,
                window.end
            )));
        }
        Ok(Self {
            window,
            samples: late.len(),
            fit: fit_log(&late),
            final_relative: series.last().map_or(0.0, |p| p.1),
            max_relative: series.iter().map(|p| p.1).fold(0.0, f64::max),
            monotone: late.windows(2).all(|w| w[1].1 <= w[0].1),
            series,
        })
    }

    /// The slope lies below `bound` by more than two standard errors, so a
    /// plateau at round-off does not count as decay. A vanishing distance
    /// passes any bound.
    pub fn slope_below(&self, bound: f64) -> bool {
        self.fit.is_none_or(|f| f.slope + 2.0 * f.slope_stderr < bound)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub r: f64,
    pub r0: f64,
    /// Amplitude of the continuous problem.
    pub amplitude: f64,
    /// Amplitude of the leading mode of the discrete scheme.
    pub scheme_amplitude: f64,
    /// Distance of `exp(-r t) B(t)` to `c Psi_r`, relative to `|c Psi_r|`.
    pub birth: SeriesSummary,
    /// The same with `c` replaced by the scheme amplitude.
    pub birth_scheme: SeriesSummary,
    /// Distance of `exp(-r t) M(t)` to `c M_psi`, relative to `|c M_psi|`.
    pub population: SeriesSummary,
    /// Relative spread of `exp(-r t) |B(t)|` over the birth window.
    pub mass_variation: f64,
    /// Largest `|B_s(t)| exp(-z0 t) / (1 + t)` for `t >= 1` over its value
    /// at `t = 1`; absent when that value is zero.
    pub singular_ratio: Option<f64>,
    pub max_truncation: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

/// Relative spread `(max - min) / mean`, zero for an all-zero series.
pub fn variation(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = v.iter().fold(0.0, |s, x| s + x) / v.len().max(1) as f64;
    if v.is_empty() || mean <= 0.0 {
        0.0
    } else {
        (hi - lo) / mean
    }
}

/// `max_{t >= 1} f(t) / f(1)` for `f(t) = s(t) exp(-z0 t) / (1 + t)`.
pub fn singular_ratio(series: &[(f64, f64)], z0: f64) -> Option<f64> {
    let f = |&(t, s): &(f64, f64)| s * (-z0 * t).exp() / (1.0 + t);
    let at_one = series.iter().find(|p| p.0 >= 1.0 - 1e-9)?;
    let base = f(at_one);
    let peak = series.iter().filter(|p| p.0 >= at_one.0).map(f).fold(0.0, f64::max);
    if base > 0.0 {
        Some(peak / base)
    } else if peak == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

//! Sampled checks of the standing model assumptions.

use serde::Serialize;

use crate::models::{fragment_moments, ModelKind, ModelSpec};
use crate::profiles::FragmentProfile;
use crate::quadrature::{gl8, integrate_adaptive};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// The model is not admissible.
    Fatal,
    /// A regularity hypothesis fails; results stay defined but convergence
    /// guarantees for the measure-valued solution are weaker.
    Regularity,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub severity: Severity,
    pub passed: bool,
    /// Sample where the check is tightest.
    pub worst_at: Option<f64>,
    pub worst_value: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.severity != Severity::Fatal)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running maximum of `value` over samples, remembering where it occurred.
struct Worst {
    at: Option<f64>,
    value: f64,
}

impl Worst {
    fn new() -> Self {
        Self { at: None, value: f64::NEG_INFINITY }
    }

    fn see(&mut self, x: f64, v: f64) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.at = Some(x);
        }
    }

    fn into_check(self, name: &'static str, severity: Severity, passed: bool) -> Check {
        Check { name, severity, passed, worst_at: self.at, worst_value: self.value }
    }
}

fn samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let geometric = lo > 0.0 && hi / lo > 100.0;
    (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            if geometric {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect()
}

pub(crate) fn validate(model: &ModelSpec, lo: f64, hi: f64, n: usize) -> ValidationReport {
    let mut checks = Vec::new();
    let xs = samples(lo, hi, n);
    let sign = if model.grows() { 1.0 } else { -1.0 };

    let mut w = Worst::new();
    for &x in &xs {
        let g = model.g(x);
        w.see(x, if g.is_finite() { -sign * g } else { f64::INFINITY });
    }
    let ok = w.value < 0.0;
    checks.push(w.into_check("growth_nonvanishing", Severity::Fatal, ok));

    let mut w = Worst::new();
    for &x in &xs {
        w.see(x, -model.mu(x).min(model.lambda(x)));
    }
    let ok = w.value <= 0.0;
    checks.push(w.into_check("rates_nonnegative", Severity::Fatal, ok));

    match model.kind() {
        ModelKind::UnequalFission { fragment } => {
            fragment_checks(model, fragment, &xs, &mut checks);
            let limit = model.event_rate().limit_at_infinity().unwrap_or(f64::NAN);
            checks.push(Check {
                name: "event_rate_limit",
                severity: Severity::Fatal,
                passed: limit > 0.0,
                worst_at: None,
                worst_value: limit,
            });
        }
        ModelKind::EqualFission => {
            let limit = model.event_rate().limit_at_infinity().unwrap_or(f64::NAN);
            checks.push(Check {
                name: "event_rate_limit",
                severity: Severity::Fatal,
                passed: limit > 0.0,
                worst_at: None,
                worst_value: limit,
            });
            let mut w = Worst::new();
            for &x in xs.iter().filter(|&&x| 2.0 * x <= hi) {
                w.see(x, model.g(2.0 * x) / (2.0 * model.g(x)));
            }
            let ok = w.value < 1.0;
            checks.push(w.into_check("growth_condition", Severity::Regularity, ok));
        }
        ModelKind::WaningBoosting { profile } => {
            let a2 = profile.alpha2();
            let mut w = Worst::new();
            for y in samples(profile.m, profile.big_m, n) {
                w.see(y, a2 * model.g(y) / model.g(profile.apply(y)));
            }
            let ok = w.value < 1.0;
            checks.push(w.into_check("jump_condition", Severity::Regularity, ok));
        }
    }
    ValidationReport { checks }
}

fn fragment_checks(model: &ModelSpec, fragment: &FragmentProfile, xs: &[f64], checks: &mut Vec<Check>) {
    let (m0, m1) = fragment_moments(fragment);
    checks.push(Check {
        name: "fragment_mass",
        severity: Severity::Fatal,
        passed: (m0 - 2.0).abs() < 1e-9,
        worst_at: None,
        worst_value: m0,
    });
    checks.push(Check {
        name: "fragment_biomass",
        severity: Severity::Fatal,
        passed: (m1 - 1.0).abs() < 1e-9,
        worst_at: None,
        worst_value: m1,
    });

    let mut w = Worst::new();
    for k in 0..=64 {
        let u = k as f64 / 128.0;
        w.see(u, (fragment.pdf(u) - fragment.pdf(1.0 - u)).abs());
    }
    let ok = w.value <= 1e-9 * fragment.sup();
    checks.push(w.into_check("fragment_symmetry", Severity::Fatal, ok));

    // Shifting h(y, .) by delta costs at most 6 delta |p|_inf / y in L1.
    let mut w = Worst::new();
    for s in [1e-3, 1e-2, 0.05, 0.2] {
        let mut cuts: Vec<f64> = fragment.knots().iter().flat_map(|&k| [k, k - s]).collect();
        cuts.retain(|&c| (0.0..=1.0).contains(&c));
        cuts.extend([0.0, 1.0]);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let shifted: f64 = cuts
            .windows(2)
            .map(|c| gl8().integrate(c[0], c[1], |u| (fragment.pdf(u) - fragment.pdf(u + s)).abs()))
            .sum();
        w.see(s, 2.0 * shifted / (6.0 * s * fragment.sup()));
    }
    let ok = w.value <= 1.0;
    checks.push(w.into_check("fragment_translation", Severity::Regularity, ok));

    // Lambda(y)/(y g(y)) must be integrable near zero.
    let f = |y: f64| model.lambda(y) / (y * model.g(y));
    let lo = xs[0].min(1.0);
    let near = integrate_adaptive(f, lo * 1e-3, lo, 1e-10);
    let far = integrate_adaptive(f, lo, 1f64.max(lo), 1e-10).abs();
    let mut w = Worst::new();
    w.see(lo, near / (1.0 + far));
    let ok = w.value < 1e-2;
    checks.push(w.into_check("small_size_integrability", Severity::Regularity, ok));
}

//! Gauss-Legendre rules and adaptive quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    /// n-point rule on [-1, 1].
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        if n == 1 {
            return Self { nodes, weights: vec![2.0] };
        }
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// A quadrature point: abscissa, weight and integrand value.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub x: f64,
    pub w: f64,
    pub f: f64,
}

/// Appends an 8-point Gauss rule on [a, b], bisected until the coarse and
/// refined estimates agree to `rel_tol`.
pub fn adaptive_samples<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
    out: &mut Vec<Sample>,
) {
    let rule = gl8();
    let whole: Vec<Sample> = rule.points(a, b).map(|(x, w)| Sample { x, w, f: f(x) }).collect();
    refine(f, a, b, &whole, rel_tol, max_depth, out, rule);
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: &[Sample],
    rel_tol: f64,
    depth: u32,
    out: &mut Vec<Sample>,
    rule: &GaussLegendre,
) {
    let m = 0.5 * (a + b);
    let left: Vec<Sample> = rule.points(a, m).map(|(x, w)| Sample { x, w, f: f(x) }).collect();
    let right: Vec<Sample> = rule.points(m, b).map(|(x, w)| Sample { x, w, f: f(x) }).collect();
    let i0: f64 = whole.iter().map(|s| s.w * s.f).sum();
    let i1: f64 = left.iter().chain(&right).map(|s| s.w * s.f).sum();
    if depth == 0 || (i0 - i1).abs() <= rel_tol * i1.abs() || !i1.is_finite() {
        out.extend(left);
        out.extend(right);
        return;
    }
    refine(f, a, m, &left, rel_tol, depth - 1, out, rule);
    refine(f, m, b, &right, rel_tol, depth - 1, out, rule);
}

pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut out = Vec::new();
    adaptive_samples(&f, a, b, rel_tol, 30, &mut out);
    out.iter().map(|s| s.w * s.f).sum()
}

/// Adaptive Simpson rule with Richardson correction.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

//! Discounted next-generation operators on the birth grid and their
//! dominant eigen-triple.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::measure::DensitySeries;
use crate::models::ModelKind;
use crate::quadrature::{adaptive_samples, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyForm {
    /// Integration in the state variable along each characteristic.
    SizeVariable,
    /// Integration in age along a numerically integrated trajectory.
    AgeQuadrature,
}

/// `K_lambda` on the birth grid. Column `j` is the discounted offspring of
/// one newborn at node `j`, stored as masses per birth cell.
#[derive(Clone, Debug)]
pub struct NGOMatrix {
    lambda: f64,
    n: usize,
    mass: Vec<f64>,
    widths: Vec<f64>,
    escape: Vec<f64>,
    form: AssemblyForm,
}

impl NGOMatrix {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn form(&self) -> AssemblyForm {
        self.form
    }

    /// Offspring mass in cell `i` per newborn at node `j`.
    pub fn mass_entry(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.n + j]
    }

    /// Offspring density at node `i` per newborn at node `j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mass_entry(i, j) / self.widths[i]
    }

    /// Probability that a newborn at node `j` leaves the truncated range
    /// alive and without an event.
    pub fn escape(&self) -> &[f64] {
        &self.escape
    }

    /// Image of per-cell masses.
    pub fn apply_mass(&self, u: &[f64]) -> Vec<f64> {
        self.mass.chunks_exact(self.n).map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
    }

    /// Image of a density given by its values at the nodes.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = phi.iter().zip(&self.widths).map(|(p, w)| p * w).collect();
        self.apply_mass(&u).iter().zip(&self.widths).map(|(m, w)| m / w).collect()
    }

    /// Adjoint action on a function given by its nodal values.
    pub fn apply_dual(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, fi) in self.mass.chunks_exact(self.n).zip(f) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += fi * m;
            }
        }
        out
    }
}

fn check_lambda(disc: &Discretization, lambda: f64) -> Result<()> {
    if !(lambda > disc.model.z0_bound()) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "discount {lambda} must exceed the bound {}",
            disc.model.z0_bound()
        )));
    }
    Ok(())
}

struct Segment {
    decay: f64,
    dtau: f64,
    first: usize,
    s0: Vec<f64>,
    s1: Vec<f64>,
}

fn segment(disc: &Discretization, lambda: f64, a: f64, b: f64, derivative: bool) -> Segment {
    let ch = &disc.chars;
    let model = &disc.model;
    let birth = &disc.grids.birth;
    let (ta, ha) = ch.coords(a);
    let (tb, hb) = ch.coords(b);
    let w = |z: f64| {
        let (t, h) = ch.coords(z);
        (-lambda * (t - ta) - (h - ha)).exp() * model.lambda(z) / model.g(z).abs()
    };
    let mut samples: Vec<Sample> = Vec::with_capacity(16);
    adaptive_samples(&w, a.min(b), a.max(b), 1e-13, 12, &mut samples);
    let tau = |z: f64| if derivative { ch.time_coord(z) - ta } else { 0.0 };
    let decay = (-lambda * (tb - ta) - (hb - ha)).exp();
    let dtau = tb - ta;
    match model.kind() {
        ModelKind::UnequalFission { fragment } => {
            let zmax = a.max(b);
            let top = birth.cell_of_clamped(zmax) + 1;
            let mut s0 = vec![0.0; top];
            let mut s1 = vec![0.0; if derivative { top } else { 0 }];
            let e = birth.edges();
            for s in &samples {
                let ws = s.w * s.f;
                let ts = tau(s.x);
                let mut prev = 0.0;
                for i in 0..top {
                    if e[i] >= s.x {
                        break;
                    }
                    let c = fragment.cdf(e[i + 1] / s.x);
                    let h = 2.0 * (c - prev);
                    prev = c;
                    s0[i] += ws * h;
                    if derivative {
                        s1[i] += ws * ts * h;
                    }
                }
            }
            Segment { decay, dtau, first: 0, s0, s1 }
        }
        _ => {
            let (x, beta) = model.offspring_atom(0.5 * (a + b)).unwrap();
            if x > birth.x_hi() {
                return Segment { decay, dtau, first: 0, s0: Vec::new(), s1: Vec::new() };
            }
            let i = birth.cell_of_clamped(x);
            let s0: f64 = samples.iter().map(|s| s.w * s.f).sum();
            let s1: f64 = if derivative { samples.iter().map(|s| s.w * s.f * tau(s.x)).sum() } else { 0.0 };
            Segment { decay, dtau, first: i, s0: vec![beta * s0], s1: vec![beta * s1] }
        }
    }
}

/// Backward recursion along the flow: the discounted offspring of a newborn
/// at `p_k` is the part produced on `[p_k, p_{k+1}]` plus the decayed
/// offspring of a newborn at `p_{k+1}`.
fn size_variable(disc: &Discretization, lambda: f64, derivative: bool) -> (Vec<f64>, Option<Vec<f64>>, Vec<f64>) {
    let birth = &disc.grids.birth;
    let n = birth.len();
    let pts = disc.path_breakpoints(&[]);
    let segs: Vec<Segment> =
        (0..pts.len() - 1).into_par_iter().map(|k| segment(disc, lambda, pts[k], pts[k + 1], derivative)).collect();
    let source_at: Vec<Option<usize>> = pts
        .iter()
        .map(|&p| birth.cell_of(p).filter(|&j| birth.nodes()[j] == p))
        .collect();
    let mut g = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut mass = vec![0.0; n * n];
    let mut dmass = if derivative { vec![0.0; n * n] } else { Vec::new() };
    for k in (0..segs.len()).rev() {
        let s = &segs[k];
        if derivative {
            for (gi, di) in g.iter_mut().zip(d.iter_mut()) {
                *di = s.decay * (*di + s.dtau * *gi);
                *gi *= s.decay;
            }
            for (o, (v0, v1)) in s.s0.iter().zip(&s.s1).enumerate() {
                g[s.first + o] += v0;
                d[s.first + o] += v1;
            }
        } else {
            for gi in g.iter_mut() {
                *gi *= s.decay;
            }
            for (o, v0) in s.s0.iter().enumerate() {
                g[s.first + o] += v0;
            }
        }
        if let Some(j) = source_at[k] {
            for i in 0..n {
                mass[i * n + j] = g[i];
                if derivative {
                    dmass[i * n + j] = d[i];
                }
            }
        }
    }
    let ch = &disc.chars;
    let h_end = ch.coords(ch.end()).1;
    let escape = birth.nodes().iter().map(|&y| (-(h_end - ch.coords(y).1)).exp()).collect();
    (mass, derivative.then_some(dmass), escape)
}

fn matrix(disc: &Discretization, lambda: f64, mass: Vec<f64>, escape: Vec<f64>, form: AssemblyForm) -> NGOMatrix {
    let birth = &disc.grids.birth;
    NGOMatrix { lambda, n: birth.len(), mass, widths: birth.widths().to_vec(), escape, form }
}

/// `K_lambda` by integration in the state variable.
pub fn assemble_ngo(disc: &Discretization, lambda: f64) -> Result<NGOMatrix> {
    check_lambda(disc, lambda)?;
    let (mass, _, escape) = size_variable(disc, lambda, false);
    Ok(matrix(disc, lambda, mass, escape, AssemblyForm::SizeVariable))
}

/// `K_lambda` together with `-dK_lambda/dlambda`, the operator whose kernel
/// carries an extra factor of the parent's age.
pub fn assemble_ngo_with_derivative(disc: &Discretization, lambda: f64) -> Result<(NGOMatrix, NGOMatrix)> {
    check_lambda(disc, lambda)?;
    let (mass, dmass, escape) = size_variable(disc, lambda, true);
    let k = matrix(disc, lambda, mass, escape.clone(), AssemblyForm::SizeVariable);
    let k1 = matrix(disc, lambda, dmass.unwrap(), escape, AssemblyForm::SizeVariable);
    Ok((k, k1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeFormOptions {
    /// Runge-Kutta step in age.
    pub step: f64,
    /// Relative tolerance of the adaptive Simpson rule.
    pub tol: f64,
}

impl Default for AgeFormOptions {
    fn default() -> Self {
        Self { step: 1e-3, tol: 1e-12 }
    }
}

/// Trajectory `(x(a), L(a))` sampled at fixed age steps with derivatives,
/// where `L` is the cumulative exit hazard.
struct Trajectory {
    h: f64,
    x: Vec<f64>,
    dx: Vec<f64>,
    l: Vec<f64>,
    dl: Vec<f64>,
    end: f64,
}

impl Trajectory {
    fn new(disc: &Discretization, y: f64, step: f64) -> Self {
        let m = &disc.model;
        let (lo, hi) = (disc.grids.state.x_lo(), disc.grids.state.x_hi());
        let f = |x: f64| (m.g(x), m.exit_rate(x));
        let (mut x, mut l) = (y, 0.0);
        let mut tr = Trajectory { h: step, x: vec![x], dx: vec![m.g(x)], l: vec![0.0], dl: vec![m.exit_rate(x)], end: 0.0 };
        loop {
            let k1 = f(x);
            let k2 = f(x + 0.5 * step * k1.0);
            let k3 = f(x + 0.5 * step * k2.0);
            let k4 = f(x + step * k3.0);
            x += step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            l += step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            tr.x.push(x);
            tr.dx.push(m.g(x));
            tr.l.push(l);
            tr.dl.push(m.exit_rate(x));
            if x > hi || x < lo || tr.x.len() > 50_000_000 {
                let bound = if x > hi { hi } else { lo };
                let k = tr.x.len() - 2;
                let (mut a0, mut a1) = (k as f64 * step, (k + 1) as f64 * step);
                for _ in 0..200 {
                    let am = 0.5 * (a0 + a1);
                    if (tr.state(am).0 - bound) * (tr.x[k] - bound) > 0.0 {
                        a0 = am;
                    } else {
                        a1 = am;
                    }
                }
                tr.end = 0.5 * (a0 + a1);
                return tr;
            }
        }
    }

    fn state(&self, a: f64) -> (f64, f64) {
        let k = ((a / self.h).floor() as usize).min(self.x.len() - 2);
        let s = a / self.h - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        let (h00, h10, h01, h11) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2);
        let x = h00 * self.x[k] + h10 * self.h * self.dx[k] + h01 * self.x[k + 1] + h11 * self.h * self.dx[k + 1];
        let l = h00 * self.l[k] + h10 * self.h * self.dl[k] + h01 * self.l[k + 1] + h11 * self.h * self.dl[k + 1];
        (x, l)
    }

    /// Ages at which the trajectory crosses the sorted thresholds.
    fn crossings(&self, thresholds: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0];
        let last = ((self.end / self.h).ceil() as usize).min(self.x.len() - 1);
        for k in 0..last {
            let (x0, x1) = (self.x[k], self.x[k + 1]);
            let (lo, hi) = (x0.min(x1), x0.max(x1));
            let from = thresholds.partition_point(|&t| t <= lo);
            let to = thresholds.partition_point(|&t| t < hi);
            let mut found: Vec<f64> = thresholds[from..to]
                .iter()
                .map(|&theta| {
                    let (mut a0, mut a1) = (k as f64 * self.h, ((k + 1) as f64 * self.h).min(self.end));
                    for _ in 0..100 {
                        let am = 0.5 * (a0 + a1);
                        if (self.state(am).0 - theta) * (x0 - theta) > 0.0 {
                            a0 = am;
                        } else {
                            a1 = am;
                        }
                    }
                    0.5 * (a0 + a1)
                })
                .filter(|&a| a > 0.0 && a < self.end)
                .collect();
            found.sort_by(f64::total_cmp);
            out.extend(found);
        }
        out.push(self.end);
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_vec<F: Fn(f64, &mut [f64])>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    tol: f64,
    depth: u32,
    out: &mut [f64],
) {
    let n = fa.len();
    let m = 0.5 * (a + b);
    let mut flm = vec![0.0; n];
    let mut frm = vec![0.0; n];
    f(0.5 * (a + m), &mut flm);
    f(0.5 * (m + b), &mut frm);
    let mut err = 0.0f64;
    let mut refined = vec![0.0; n];
    for i in 0..n {
        let whole = (b - a) / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
        let halves = (m - a) / 6.0 * (fa[i] + 4.0 * flm[i] + fm[i]) + (b - m) / 6.0 * (fm[i] + 4.0 * frm[i] + fb[i]);
        refined[i] = halves + (halves - whole) / 15.0;
        err = err.max((halves - whole).abs());
    }
    if depth == 0 || err <= 15.0 * tol {
        for (o, r) in out.iter_mut().zip(&refined) {
            *o += r;
        }
        return;
    }
    simpson_vec(f, a, m, fa, &flm, fm, 0.5 * tol, depth - 1, out);
    simpson_vec(f, m, b, fm, &frm, fb, 0.5 * tol, depth - 1, out);
}

/// `K_lambda` by adaptive Simpson quadrature in age along a fixed-step
/// Runge-Kutta trajectory. Independent of the tabulated characteristics and
/// used to cross-check [`assemble_ngo`].
pub fn assemble_ngo_age_form(disc: &Discretization, lambda: f64, opts: AgeFormOptions) -> Result<NGOMatrix> {
    check_lambda(disc, lambda)?;
    let birth = &disc.grids.birth;
    let model = &disc.model;
    let n = birth.len();
    let mut thresholds = disc.path_breakpoints(&[]);
    thresholds.sort_by(f64::total_cmp);
    let columns: Vec<(Vec<f64>, f64)> = birth
        .nodes()
        .par_iter()
        .map(|&y| {
            let tr = Trajectory::new(disc, y, opts.step);
            let ages = tr.crossings(&thresholds);
            let mut col = vec![0.0; n];
            // Absolute tolerance floor, relative to the kernel at birth.
            let floor = 1e-3 * model.lambda(y).abs() * 2.0;
            for piece in ages.windows(2) {
                let (a0, a1) = (piece[0], piece[1]);
                if a1 <= a0 {
                    continue;
                }
                let weight = |a: f64| {
                    let (x, l) = tr.state(a);
                    (x, (-lambda * a - l).exp() * model.lambda(x))
                };
                let mut acc = vec![0.0; n];
                let f = |a: f64, out: &mut [f64]| {
                    let (x, w) = weight(a);
                    model.offspring_cells(x, birth, out);
                    out.iter_mut().for_each(|v| *v *= w);
                };
                let (mut fa, mut fm, mut fb) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
                f(a0, &mut fa);
                f(0.5 * (a0 + a1), &mut fm);
                f(a1, &mut fb);
                if model.offspring_is_atomic() {
                    // The target cell is fixed on each piece; evaluate it at the midpoint.
                    let i = fm.iter().position(|&v| v != 0.0);
                    let Some(i) = i else { continue };
                    let beta = model.offspring_atom(tr.state(0.5 * (a0 + a1)).0).unwrap().1;
                    let g = |a: f64, out: &mut [f64]| out[0] = beta * weight(a).1;
                    let (mut ga, mut gm, mut gb) = ([0.0], [0.0], [0.0]);
                    g(a0, &mut ga);
                    g(0.5 * (a0 + a1), &mut gm);
                    g(a1, &mut gb);
                    let tol = opts.tol * (a1 - a0) * ga[0].abs().max(gm[0].abs()).max(gb[0].abs()).max(floor);
                    let mut out = [0.0];
                    simpson_vec(&g, a0, a1, &ga, &gm, &gb, tol, 30, &mut out);
                    col[i] += out[0];
                } else {
                    let peak = [&fa, &fm, &fb].iter().map(|v| v.iter().sum::<f64>()).fold(floor, f64::max);
                    simpson_vec(&f, a0, a1, &fa, &fm, &fb, opts.tol * peak * (a1 - a0), 30, &mut acc);
                    for (c, v) in col.iter_mut().zip(&acc) {
                        *c += v;
                    }
                }
            }
            let escape = (-tr.state(tr.end).1).exp();
            (col, escape)
        })
        .collect();
    let mut mass = vec![0.0; n * n];
    let mut escape = vec![0.0; n];
    for (j, (col, e)) in columns.into_iter().enumerate() {
        for i in 0..n {
            mass[i * n + j] = col[i];
        }
        escape[j] = e;
    }
    Ok(matrix(disc, lambda, mass, escape, AssemblyForm::AgeQuadrature))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Stop once successive eigenvalue estimates differ by less than
    /// `tol` relative.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iter: 100_000 }
    }
}

/// Dominant eigenvalue with right eigenvector `psi` (a density with unit
/// mass) and left eigenvector `dual` (normalised by `<dual, psi> = 1`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Eigen {
    pub rho: f64,
    pub psi: Vec<f64>,
    pub dual: Vec<f64>,
    pub iterations: usize,
    /// `|K psi - rho psi|_1`
    pub residual: f64,
}

fn power(apply: impl Fn(&[f64]) -> Vec<f64>, start: Vec<f64>, opts: PowerOptions, what: &str) -> Result<(f64, Vec<f64>, usize)> {
    let mut u = start;
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= s);
    let mut rho_prev = f64::NAN;
    for it in 1..=opts.max_iter {
        let v = apply(&u);
        let rho: f64 = v.iter().sum();
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::DegenerateSpectrum(format!("{what}: iterate has mass {rho}")));
        }
        let next: Vec<f64> = v.iter().map(|x| x / rho).collect();
        let change: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        u = next;
        if (rho - rho_prev).abs() <= opts.tol * rho && change <= 1e3 * opts.tol {
            return Ok((rho, u, it));
        }
        rho_prev = rho;
    }
    Err(Error::NonConvergence { what: what.into(), iterations: opts.max_iter })
}

pub fn spectral_radius(k: &NGOMatrix, opts: PowerOptions) -> Result<Eigen> {
    spectral_radius_from(k, opts, None)
}

/// Power iteration warm-started from a cell-mass vector.
pub fn spectral_radius_from(k: &NGOMatrix, opts: PowerOptions, start: Option<&[f64]>) -> Result<Eigen> {
    let n = k.len();
    let start = start.map(|s| s.iter().map(|v| v.abs() + 1e-300).collect()).unwrap_or_else(|| vec![1.0; n]);
    let (rho, u, iterations) = power(|u| k.apply_mass(u), start, opts, "power iteration")?;
    let (rho_dual, f, _) = power(|f| k.apply_dual(f), vec![1.0; n], opts, "dual power iteration")?;
    if (rho - rho_dual).abs() > 1e-8 * rho {
        return Err(Error::DegenerateSpectrum(format!("primal {rho} and dual {rho_dual} disagree")));
    }
    let psi: Vec<f64> = u.iter().zip(&k.widths).map(|(m, w)| m / w).collect();
    let pairing: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    let dual = f.iter().map(|v| v / pairing).collect();
    let ku = k.apply_mass(&u);
    let residual = ku.iter().zip(&u).map(|(a, b)| (a - rho * b).abs()).sum();
    Ok(Eigen { rho, psi, dual, iterations, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralOptions {
    pub power: PowerOptions,
    /// Width of the final bracket around the Malthusian parameter.
    pub lambda_tol: f64,
    /// Largest discount tried while bracketing a positive root.
    pub lambda_max: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { power: PowerOptions::default(), lambda_tol: 1e-10, lambda_max: 1e3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Malthusian parameter.
    pub r: f64,
    /// Basic reproduction number.
    pub r0: f64,
    /// Stable birth distribution: densities at the birth nodes, unit mass.
    pub psi: Vec<f64>,
    /// Reproductive value at the birth nodes, `<F, psi> = 1`.
    pub dual: Vec<f64>,
    /// `rho(K_r)`, equal to one up to the root tolerance.
    pub rho_at_r: f64,
    pub eigen_residual: f64,
    /// Number of operator assemblies used to locate `r`.
    pub evaluations: usize,
    /// Largest probability that a newborn escapes the truncated range.
    pub max_escape: f64,
}

struct RhoEval<'a> {
    disc: &'a Discretization,
    opts: SpectralOptions,
    warm: Option<Vec<f64>>,
    count: usize,
}

impl RhoEval<'_> {
    fn eigen(&mut self, lambda: f64) -> Result<(Eigen, NGOMatrix)> {
        let k = assemble_ngo(self.disc, lambda)?;
        self.count += 1;
        let e = spectral_radius_from(&k, self.opts.power, self.warm.as_deref())?;
        self.warm = Some(e.psi.iter().zip(self.disc.grids.birth.widths()).map(|(p, w)| p * w).collect());
        Ok((e, k))
    }

    fn excess(&mut self, lambda: f64) -> Result<f64> {
        Ok(self.eigen(lambda)?.0.rho - 1.0)
    }
}

pub fn basic_reproduction_number(disc: &Discretization, opts: PowerOptions) -> Result<f64> {
    Ok(spectral_radius(&assemble_ngo(disc, 0.0)?, opts)?.rho)
}

/// Solves `rho(K_r) = 1` by bracketing and bisection, then a secant polish.
pub fn malthusian(disc: &Discretization, opts: SpectralOptions) -> Result<SpectralResult> {
    let mut ev = RhoEval { disc, opts, warm: None, count: 0 };
    let r0 = ev.eigen(0.0)?.0.rho;
    let z0 = disc.model.z0_bound();
    let floor = z0 + 1e-8 * (1.0 + z0.abs());
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    if r0 > 1.0 {
        lo = 0.0;
        f_lo = r0 - 1.0;
        hi = 1.0;
        loop {
            f_hi = ev.excess(hi)?;
            if f_hi <= 0.0 {
                break;
            }
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            if hi > opts.lambda_max {
                return Err(Error::NoGrowthRate(format!("rho stays above one up to lambda = {}", opts.lambda_max)));
            }
        }
    } else if r0 < 1.0 {
        hi = 0.0;
        f_hi = r0 - 1.0;
        let mut step = 1.0f64;
        loop {
            lo = (-step).max(floor);
            f_lo = ev.excess(lo)?;
            if f_lo >= 0.0 {
                break;
            }
            if lo <= floor {
                return Err(Error::NoGrowthRate(format!("rho stays below one down to the bound {z0}")));
            }
            hi = lo;
            f_hi = f_lo;
            step *= 2.0;
        }
    } else {
        lo = 0.0;
        hi = 0.0;
        f_lo = 0.0;
        f_hi = 0.0;
    }
    while hi - lo > opts.lambda_tol {
        let mid = 0.5 * (lo + hi);
        let f = ev.excess(mid)?;
        if f > 0.0 {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    let mut r = if f_lo == f_hi { 0.5 * (lo + hi) } else { lo - f_lo * (hi - lo) / (f_hi - f_lo) };
    if !(r >= lo && r <= hi) {
        r = 0.5 * (lo + hi);
    }
    let (mut e, mut k) = ev.eigen(r)?;
    let mut f = e.rho - 1.0;
    let mut prev = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..4 {
        if f == 0.0 || f == prev.1 {
            break;
        }
        let next = r - f * (r - prev.0) / (f - prev.1);
        if !(next >= lo && next <= hi) || next == r {
            break;
        }
        let (e2, k2) = ev.eigen(next)?;
        let f2 = e2.rho - 1.0;
        if f2.abs() >= f.abs() {
            break;
        }
        prev = (r, f);
        r = next;
        f = f2;
        e = e2;
        k = k2;
    }
    let max_escape = k.escape().iter().cloned().fold(0.0, f64::max);
    Ok(SpectralResult {
        r,
        r0,
        psi: e.psi,
        dual: e.dual,
        rho_at_r: e.rho,
        eigen_residual: e.residual,
        evaluations: ev.count,
        max_escape,
    })
}

/// Residue of the Laplace-transformed birth rate at `r`: the weight `c` in
/// `exp(-r t) B(t) -> c psi`, computed from the forcing term of the
/// renewal equation.
pub fn amplitude(disc: &Discretization, result: &SpectralResult, forcing: &DensitySeries) -> Result<f64> {
    if *forcing.grid != *disc.grids.birth {
        return Err(Error::GridMismatch);
    }
    let (_, k1) = assemble_ngo_with_derivative(disc, result.r)?;
    let w = disc.grids.birth.widths();
    let u: Vec<f64> = result.psi.iter().zip(w).map(|(p, w)| p * w).collect();
    let denom: f64 = k1.apply_mass(&u).iter().zip(&result.dual).map(|(a, b)| a * b).sum();
    let b0 = forcing.discounted_sum(result.r);
    let numer: f64 = b0.iter().zip(w).zip(&result.dual).map(|((b, w), f)| b * w * f).sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateSpectrum("mean age of reproduction is not positive".into()));
    }
    Ok(numer / denom)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoCurve {
    pub points: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
}

pub fn rho_curve(disc: &Discretization, lambdas: &[f64], opts: PowerOptions) -> Result<RhoCurve> {
    let mut ls = lambdas.to_vec();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let mut points = Vec::with_capacity(ls.len());
    let mut warm: Option<Vec<f64>> = None;
    for l in ls {
        let k = assemble_ngo(disc, l)?;
        let e = spectral_radius_from(&k, opts, warm.as_deref())?;
        warm = Some(e.psi.iter().zip(disc.grids.birth.widths()).map(|(p, w)| p * w).collect());
        points.push((l, e.rho));
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(RhoCurve { points, strictly_decreasing })
}

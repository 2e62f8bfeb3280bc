//! Time stepping of the renewal equation for the birth measure.
//!
//! The birth rate is a measure `B(t)` on the birth grid: atoms for the
//! first-generation offspring of atoms in the initial population, cell masses
//! for everything else. History births are concentrated at the cell nodes and
//! the convolution in age is done by product integration: on the age bin
//! `((i-1) dt, i dt]` the history is interpolated linearly between steps
//! `j-i` and `j-i+1` after factoring out `exp(sigma t)`, and the kernel is
//! integrated exactly along the characteristics. With `sigma` equal to the
//! Malthusian parameter the scheme grows at exactly the continuous rate.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measure::{Atom, DensitySeries, HybridMeasure};
use crate::spectral::{amplitude, assemble_ngo_with_derivative, SpectralResult};
use crate::walker::{Piece, Walker};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Oldest age kept in the convolution; derived from `tail_tol` and the
    /// model's decay bound when absent.
    pub age_cutoff: Option<f64>,
    pub tail_tol: f64,
    /// Exponent factored out of the history before interpolating it.
    pub fitting_rate: f64,
    /// With feedback off every step returns the initial birth rate.
    pub feedback: bool,
    /// Largest allowed growth of the total birth mass in one step.
    pub blowup_factor: f64,
    /// Relative truncation loss above which the run is flagged.
    pub truncation_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_final: 40.0,
            age_cutoff: None,
            tail_tol: 1e-10,
            fitting_rate: 0.0,
            feedback: true,
            blowup_factor: 100.0,
            truncation_tol: 1e-6,
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!("t_final must be nonnegative, got {}", self.t_final)));
        }
        let n = self.t_final / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidConfig(format!("t_final {} is not a multiple of dt {}", self.t_final, self.dt)));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidConfig(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidConfig("blowup_factor must exceed 1".into()));
        }
        if !self.fitting_rate.is_finite() {
            return Err(Error::InvalidConfig("fitting_rate must be finite".into()));
        }
        Ok(n.round() as usize)
    }

    /// The age cutoff in use for `disc`.
    pub fn cutoff(&self, disc: &Discretization) -> Result<f64> {
        let a = match self.age_cutoff {
            Some(a) => a,
            None => self.tail_tol.ln() / disc.model.z0_bound(),
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidConfig(format!("age cutoff must be positive, got {a}")));
        }
        Ok(a)
    }
}

/// Sparse age-bin table, grouped by bin: `entries[start[i]..start[i+1]]`
/// hold `(source node, target cell, weight on step j-i, weight on step j-i+1)`.
#[derive(Clone, Debug, Default)]
pub(crate) struct BinTable {
    start: Vec<usize>,
    src: Vec<u32>,
    dst: Vec<u32>,
    w: Vec<[f64; 2]>,
}

impl BinTable {
    fn from_columns(bins: usize, columns: Vec<Vec<(u32, u32, [f64; 2])>>) -> Self {
        let mut count = vec![0usize; bins + 2];
        for col in &columns {
            for &(bin, _, _) in col {
                count[bin as usize + 1] += 1;
            }
        }
        for i in 1..count.len() {
            count[i] += count[i - 1];
        }
        let total = count[bins + 1];
        let mut next = count.clone();
        let mut t = BinTable { start: count, src: vec![0; total], dst: vec![0; total], w: vec![[0.0; 2]; total] };
        for (j, col) in columns.into_iter().enumerate() {
            for (bin, dst, w) in col {
                let k = next[bin as usize];
                next[bin as usize] += 1;
                t.src[k] = j as u32;
                t.dst[k] = dst;
                t.w[k] = w;
            }
        }
        t
    }

    pub fn bins(&self) -> usize {
        self.start.len().saturating_sub(2)
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    /// Adds the bin-`i` contributions `w[0] * older[src] + w[1] * newer[src]`.
    pub fn accumulate(&self, i: usize, older: Option<&[f64]>, newer: Option<&[f64]>, out: &mut [f64]) {
        let r = self.start[i]..self.start[i + 1];
        let (src, dst, w) = (&self.src[r.clone()], &self.dst[r.clone()], &self.w[r]);
        match (older, newer) {
            (Some(o), Some(n)) => {
                for k in 0..src.len() {
                    let s = src[k] as usize;
                    out[dst[k] as usize] += w[k][0] * o[s] + w[k][1] * n[s];
                }
            }
            (Some(o), None) => {
                for k in 0..src.len() {
                    out[dst[k] as usize] += w[k][0] * o[src[k] as usize];
                }
            }
            (None, Some(n)) => {
                for k in 0..src.len() {
                    out[dst[k] as usize] += w[k][1] * n[src[k] as usize];
                }
            }
            (None, None) => {}
        }
    }
}

/// Where offspring of one piece of a characteristic land.
pub(crate) enum Deposit {
    /// A birth cell, for atomic offspring laws.
    Birth(usize),
    /// A state cell whose offspring spread over the birth grid.
    State(usize),
    /// Beyond the truncated birth domain.
    Lost,
}

pub(crate) fn deposit(disc: &Discretization, mid: f64) -> Deposit {
    let model = &disc.model;
    if model.offspring_is_atomic() {
        let (x, _) = model.offspring_atom(mid).unwrap();
        if x > disc.grids.birth.x_hi() {
            Deposit::Lost
        } else {
            Deposit::Birth(disc.grids.birth.cell_of_clamped(x))
        }
    } else {
        Deposit::State(disc.grids.state.cell_of_clamped(mid))
    }
}

/// Age-binned kernel for births concentrated at the birth-grid nodes.
#[derive(Clone, Debug)]
pub struct AgeBinKernel {
    pub dt: f64,
    pub sigma: f64,
    pub cutoff: f64,
    offspring: BinTable,
    transport: BinTable,
    /// Survival to the cutoff age of a newborn at each node; zero when the
    /// characteristic leaves the domain first.
    tail: Vec<f64>,
}

impl AgeBinKernel {
    pub fn build(disc: &Discretization, dt: f64, cutoff: f64, sigma: f64) -> Self {
        let bins = (cutoff / dt).ceil().max(1.0) as usize;
        let walker = Walker::new(disc);
        let ch = &disc.chars;
        let cols: Vec<_> = disc
            .grids
            .birth
            .nodes()
            .par_iter()
            .map(|&y| {
                let mut off = Vec::new();
                let mut tr = Vec::new();
                let surv = walker.walk(y, 1, bins, dt, sigma, |bin, p: Piece| {
                    push_offspring(disc, &mut off, bin, &p, (-sigma * dt).exp());
                    let cell = disc.grids.state.cell_of_clamped(p.mid) as u32;
                    tr.push((bin as u32, cell, [p.transport[0], p.transport[1] * (-sigma * dt).exp()]));
                });
                let tail = if ch.age_to_end(y) > bins as f64 * dt { surv } else { 0.0 };
                (merge(off), merge(tr), tail)
            })
            .collect();
        let mut offspring = Vec::with_capacity(cols.len());
        let mut transport = Vec::with_capacity(cols.len());
        let mut tail = Vec::with_capacity(cols.len());
        for (o, t, s) in cols {
            offspring.push(o);
            transport.push(t);
            tail.push(s);
        }
        Self {
            dt,
            sigma,
            cutoff,
            offspring: BinTable::from_columns(bins, offspring),
            transport: BinTable::from_columns(bins, transport),
            tail,
        }
    }

    pub fn bins(&self) -> usize {
        self.offspring.bins()
    }

    pub fn entries(&self) -> usize {
        self.offspring.len() + self.transport.len()
    }

    pub(crate) fn offspring(&self) -> &BinTable {
        &self.offspring
    }

    pub(crate) fn transport(&self) -> &BinTable {
        &self.transport
    }
}

fn push_offspring(disc: &Discretization, out: &mut Vec<(u32, u32, [f64; 2])>, bin: usize, p: &Piece, shift: f64) {
    let w = [p.offspring[0], p.offspring[1] * shift];
    match deposit(disc, p.mid) {
        Deposit::Birth(k) | Deposit::State(k) => out.push((bin as u32, k as u32, w)),
        Deposit::Lost => {}
    }
}

/// Sums consecutive entries with the same bin and target.
fn merge(mut v: Vec<(u32, u32, [f64; 2])>) -> Vec<(u32, u32, [f64; 2])> {
    v.sort_by_key(|e| (e.0, e.1));
    let mut out: Vec<(u32, u32, [f64; 2])> = Vec::with_capacity(v.len());
    for e in v {
        match out.last_mut() {
            Some(l) if l.0 == e.0 && l.1 == e.1 => {
                l.2[0] += e.2[0];
                l.2[1] += e.2[1];
            }
            _ => out.push(e),
        }
    }
    out
}

/// Maps offspring accumulated in table targets to birth-cell masses.
pub(crate) struct Spreader {
    daughters: Option<Arc<crate::discretization::CellOffspring>>,
    n_birth: usize,
    n_state: usize,
}

impl Spreader {
    pub fn new(disc: &Discretization) -> Self {
        let daughters = (!disc.model.offspring_is_atomic()).then(|| disc.cell_offspring());
        Self { daughters, n_birth: disc.grids.birth.len(), n_state: disc.grids.state.len() }
    }

    pub fn targets(&self) -> usize {
        if self.daughters.is_some() {
            self.n_state
        } else {
            self.n_birth
        }
    }

    /// Adds the birth-cell image of `acc` to `out`.
    pub fn spread(&self, acc: &[f64], out: &mut [f64]) {
        match &self.daughters {
            None => out.iter_mut().zip(acc).for_each(|(o, a)| *o += a),
            Some(d) => {
                let ns = self.n_state;
                for (k, o) in out.iter_mut().enumerate() {
                    let row = &d.daughters[k * ns..(k + 1) * ns];
                    *o += row.iter().zip(acc).map(|(h, a)| h * a).sum::<f64>();
                }
            }
        }
    }
}

/// Birth rate of the initial population at time `t`: atoms of `m0` give
/// atoms for atomic offspring laws, everything else is binned.
pub fn initial_birth_rate(disc: &Discretization, m0: &HybridMeasure, t: f64) -> Result<HybridMeasure> {
    let walker = Walker::new(disc);
    let spreader = Spreader::new(disc);
    let (atoms, masses) = initial_births(disc, &walker, &spreader, m0, t)?;
    Ok(HybridMeasure::from_cell_masses_unchecked(disc.grids.birth.clone(), atoms, &masses))
}

fn initial_births(
    disc: &Discretization,
    walker: &Walker,
    spreader: &Spreader,
    m0: &HybridMeasure,
    t: f64,
) -> Result<(Vec<Atom>, Vec<f64>)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("time must be nonnegative, got {t}")));
    }
    if *m0.grid() != disc.grids.state {
        return Err(Error::GridMismatch);
    }
    let model = &disc.model;
    let birth = &disc.grids.birth;
    let ch = &disc.chars;
    let mut acc = vec![0.0; spreader.targets()];
    let mut atoms = Vec::new();
    let mut cells = vec![0.0; birth.len()];
    let mut tmp = vec![0.0; birth.len()];
    for a in m0.atoms() {
        let Some(z) = ch.advance(a.location, t) else { continue };
        let rate = a.mass * ch.survival(a.location, z) * model.lambda(z);
        match model.offspring_atom(z) {
            Some((x, beta)) => {
                if x <= birth.x_hi() && rate > 0.0 {
                    atoms.push(Atom { location: x.max(birth.x_lo()), mass: rate * beta });
                }
            }
            None => {
                model.offspring_cells(z, birth, &mut tmp);
                cells.iter_mut().zip(&tmp).for_each(|(c, v)| *c += rate * v);
            }
        }
    }
    let e = disc.grids.state.edges();
    for (p, &d) in m0.density().iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        walker.push_cell(e[p], e[p + 1], d, t, |piece| {
            let w = piece.offspring[0];
            match deposit(disc, piece.mid) {
                Deposit::Birth(k) | Deposit::State(k) => acc[k] += w,
                Deposit::Lost => {}
            }
        });
    }
    spreader.spread(&acc, &mut cells);
    Ok((atoms, cells))
}

/// Per-step diagnostics of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub total_mass: f64,
    pub singular_mass: f64,
    pub truncation_loss: f64,
}

/// The computed birth measure at every step, with what is needed to
/// reconstruct the population.
#[derive(Clone, Debug)]
pub struct BirthHistory {
    pub config: SimConfig,
    grid: Arc<Grid>,
    atoms: Vec<Vec<Atom>>,
    cells: Vec<Vec<f64>>,
    forcing: DensitySeries,
    records: Vec<StepRecord>,
    kernel: Arc<AgeBinKernel>,
    /// Population carried by the offspring of birth atoms, per step and
    /// state cell.
    atom_population: Vec<Vec<f64>>,
    /// Discounted birth-cell masses the first step would have fed without
    /// the start at time zero.
    ramp: Vec<f64>,
    /// Largest relative truncation loss over the run.
    pub max_truncation: f64,
}

impl BirthHistory {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.config.dt
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn entry(&self, step: usize) -> HybridMeasure {
        HybridMeasure::from_cell_masses_unchecked(self.grid.clone(), self.atoms[step].clone(), &self.cells[step])
    }

    /// Birth-cell masses of the grid part at `step`.
    pub fn cell_masses(&self, step: usize) -> &[f64] {
        &self.cells[step]
    }

    pub fn atoms(&self, step: usize) -> &[Atom] {
        &self.atoms[step]
    }

    /// Initial birth rate per step, as cell densities with atoms projected.
    pub fn forcing(&self) -> &DensitySeries {
        &self.forcing
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn kernel(&self) -> &AgeBinKernel {
        &self.kernel
    }

    pub(crate) fn atom_population(&self, step: usize) -> &[f64] {
        &self.atom_population[step]
    }

    pub fn truncation_exceeded(&self) -> bool {
        self.max_truncation > self.config.truncation_tol
    }

    /// Step whose time is `t`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.config.dt;
        let j = s.round();
        if !(j >= 0.0) || (s - j).abs() > 1e-6 || j as usize >= self.len() {
            return Err(Error::InvalidConfig(format!("time {t} is not a step of the history")));
        }
        Ok(j as usize)
    }

    /// Time series CSV with columns `t,total_mass,singular_mass,truncation_loss`.
    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Amplitude of the leading mode of the discrete scheme, valid when the
/// fitting rate equals `result.r`. It differs from the continuous amplitude
/// by the first-order error of the discrete Laplace transform of the forcing.
pub fn scheme_amplitude(disc: &Discretization, result: &SpectralResult, h: &BirthHistory) -> Result<f64> {
    if (h.kernel.sigma - result.r).abs() > 1e-9 * (1.0 + result.r.abs()) {
        return Err(Error::InvalidConfig(format!(
            "the history was fitted at {} but the spectrum has r = {}",
            h.kernel.sigma, result.r
        )));
    }
    let c = amplitude(disc, result, &h.forcing)?;
    let (_, k1) = assemble_ngo_with_derivative(disc, result.r)?;
    let w = disc.grids.birth.widths();
    let u: Vec<f64> = result.psi.iter().zip(w).map(|(p, w)| p * w).collect();
    let denom: f64 = k1.apply_mass(&u).iter().zip(&result.dual).map(|(a, b)| a * b).sum();
    let ramp: f64 = h.ramp.iter().zip(&result.dual).map(|(a, b)| a * b).sum();
    Ok(c - h.config.dt * ramp / denom)
}

pub fn singular_mass_series(h: &BirthHistory) -> Vec<(f64, f64)> {
    h.records.iter().map(|r| (r.t, r.singular_mass)).collect()
}

/// Solves `B = L_K B + B_0` on `[0, t_final]` from the initial population `m0`.
pub fn solve(disc: &Discretization, m0: &HybridMeasure, cfg: &SimConfig) -> Result<BirthHistory> {
    let steps = cfg.steps()?;
    let cutoff = cfg.cutoff(disc)?;
    if *m0.grid() != disc.grids.state {
        return Err(Error::GridMismatch);
    }
    let dt = cfg.dt;
    let sigma = cfg.fitting_rate;
    let birth = disc.grids.birth.clone();
    let nb = birth.len();
    let ns = disc.grids.state.len();
    let kernel = Arc::new(AgeBinKernel::build(disc, dt, cutoff, sigma));
    let bins = kernel.bins();
    let walker = Walker::new(disc);
    let spreader = Spreader::new(disc);
    let nt = spreader.targets();

    let b0: Vec<(Vec<Atom>, Vec<f64>)> =
        (0..=steps).into_par_iter().map(|j| initial_births(disc, &walker, &spreader, m0, j as f64 * dt)).collect::<Result<_>>()?;

    // Offspring and population of the birth atoms, pushed ahead into the
    // steps they reach.
    let mut atom_acc = vec![vec![0.0; nt]; steps + 1];
    let mut atom_population = vec![vec![0.0; ns]; steps + 1];
    // Weight the scheme leaves out by not interpolating B(0) towards
    // births before time zero; needed for the amplitude of the scheme.
    let mut ramp_acc = vec![0.0; nt];
    {
        let shift = (-sigma * dt).exp();
        for (s, (atoms, _)) in b0.iter().enumerate() {
            for a in atoms {
                let last = bins.min(steps - s + 1);
                walker.walk(a.location, 1, last, dt, sigma, |i, p| {
                    let w = [a.mass * p.offspring[0], a.mass * p.offspring[1] * shift];
                    let tr = [a.mass * p.transport[0], a.mass * p.transport[1] * shift];
                    let cell = disc.grids.state.cell_of_clamped(p.mid);
                    let k = match deposit(disc, p.mid) {
                        Deposit::Birth(k) | Deposit::State(k) if cfg.feedback => Some(k),
                        _ => None,
                    };
                    if s + i <= steps {
                        if let Some(k) = k {
                            atom_acc[s + i][k] += w[0];
                        }
                        atom_population[s + i][cell] += tr[0];
                    }
                    if s >= 1 {
                        if let Some(k) = k {
                            atom_acc[s + i - 1][k] += w[1];
                        }
                        atom_population[s + i - 1][cell] += tr[1];
                    } else if let Some(k) = k {
                        ramp_acc[k] += w[1] * (-sigma * (i - 1) as f64 * dt).exp();
                    }
                });
            }
        }
    }

    let mut cells: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut atoms_out = Vec::with_capacity(steps + 1);
    let mut records = Vec::with_capacity(steps + 1);
    let mut forcing = DensitySeries::new(dt, birth.clone());
    let mut max_truncation: f64 = 0.0;
    let widths = birth.widths();
    let table = kernel.offspring();
    let mut acc = vec![0.0; nt];
    let mut prev_total = 0.0;
    for (j, (atoms, b0_cells)) in b0.into_iter().enumerate() {
        let t = j as f64 * dt;
        let mut f = b0_cells.clone();
        for a in &atoms {
            f[birth.cell_of_clamped(a.location)] += a.mass;
        }
        forcing.values.push(f.iter().zip(widths).map(|(m, w)| m / w).collect());

        let mut u = b0_cells;
        if cfg.feedback && j >= 1 {
            acc.iter_mut().zip(&atom_acc[j]).for_each(|(a, v)| *a = *v);
            for i in 1..=bins.min(j) {
                let newer = (i >= 2).then(|| cells[j + 1 - i].as_slice());
                table.accumulate(i, Some(&cells[j - i]), newer, &mut acc);
            }
            spreader.spread(&acc, &mut u);
            // The newest bin couples to the current step; fixed-point
            // iteration converges at a rate of order dt times the event rate.
            let base = u.clone();
            let mut iter = 0;
            loop {
                acc.iter_mut().for_each(|a| *a = 0.0);
                table.accumulate(1, None, Some(&u), &mut acc);
                let mut next = base.clone();
                spreader.spread(&acc, &mut next);
                let diff: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
                let size: f64 = next.iter().sum();
                u = next;
                iter += 1;
                if diff <= 1e-15 * size || size == 0.0 {
                    break;
                }
                if iter > 200 || !size.is_finite() {
                    return Err(Error::Instability {
                        time: t,
                        detail: "the first age bin does not contract; reduce dt".into(),
                    });
                }
            }
        }
        let singular = atoms.iter().fold(0.0, |s, a| s + a.mass);
        let total = singular + u.iter().sum::<f64>();
        if !total.is_finite() || (prev_total > 0.0 && total > cfg.blowup_factor * prev_total) {
            return Err(Error::Instability {
                time: t,
                detail: format!("birth mass grew from {prev_total:e} to {total:e} in one step; reduce dt"),
            });
        }
        prev_total = total;
        let truncation_loss = if cfg.feedback && j >= bins {
            cells[j - bins].iter().zip(&kernel.tail).map(|(m, s)| m * s).sum()
        } else {
            0.0
        };
        if total > 0.0 {
            max_truncation = max_truncation.max(truncation_loss / total);
        }
        if j == 0 && cfg.feedback {
            for i in 1..=bins {
                let mut part = vec![0.0; nt];
                table.accumulate(i, None, Some(&u), &mut part);
                let e = (-sigma * (i - 1) as f64 * dt).exp();
                ramp_acc.iter_mut().zip(&part).for_each(|(r, p)| *r += e * p);
            }
        }
        records.push(StepRecord { t, total_mass: total, singular_mass: singular, truncation_loss });
        cells.push(u);
        atoms_out.push(atoms);
    }
    debug_assert_eq!(cells[0].len(), nb);
    let mut ramp = vec![0.0; nb];
    spreader.spread(&ramp_acc, &mut ramp);
    Ok(BirthHistory {
        ramp,
        config: cfg.clone(),
        grid: birth,
        atoms: atoms_out,
        cells,
        forcing,
        records,
        kernel,
        atom_population,
        max_truncation,
    })
}

/// Second-generation births at time `t` of a unit cohort born at `x0` at
/// time zero, by direct double quadrature over the first birth time.
/// Returns birth-cell masses.
pub fn second_generation(disc: &Discretization, x0: f64, t: f64, panels: usize) -> Result<Vec<f64>> {
    let model = &disc.model;
    if !model.offspring_is_atomic() {
        return Err(Error::InvalidModel("second_generation needs an atomic offspring law".into()));
    }
    let ch = &disc.chars;
    let birth = &disc.grids.birth;
    let mut out = vec![0.0; birth.len()];
    let gl = crate::quadrature::gl8();
    let h = t / panels.max(1) as f64;
    for k in 0..panels.max(1) {
        for (a1, w) in gl.points(k as f64 * h, (k + 1) as f64 * h) {
            let Some(z1) = ch.advance(x0, a1) else { continue };
            let (xi, beta1) = model.offspring_atom(z1).unwrap();
            let rate1 = ch.survival(x0, z1) * model.lambda(z1) * beta1;
            let Some(z2) = ch.advance(xi, t - a1) else { continue };
            let (x2, beta2) = model.offspring_atom(z2).unwrap();
            let rate2 = ch.survival(xi, z2) * model.lambda(z2) * beta2;
            if x2 <= birth.x_hi() {
                out[birth.cell_of_clamped(x2)] += w * rate1 * rate2;
            }
        }
    }
    Ok(out)
}

/// Cells holding more than `frac` of the total mass, as `(count, span)`
/// where the span runs from the first to the last such cell.
pub fn occupied_cells(masses: &[f64], frac: f64) -> (usize, usize) {
    let total: f64 = masses.iter().sum();
    let idx: Vec<usize> = masses.iter().enumerate().filter(|(_, &m)| m > frac * total).map(|(i, _)| i).collect();
    match (idx.first(), idx.last()) {
        (Some(a), Some(b)) => (idx.len(), b - a + 1),
        _ => (0, 0),
    }
}

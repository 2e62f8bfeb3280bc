//! Population state from the birth history, the stable population and the
//! birth rate implied by a population.

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::measure::{Atom, HybridMeasure};
use crate::renewal::BirthHistory;
use crate::spectral::SpectralResult;
use crate::walker::Walker;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub t: f64,
    pub measure: HybridMeasure,
    /// Mass of the initial population whose characteristics left the
    /// truncated domain before `t`, weighted by survival to the exit.
    pub exit_loss: f64,
}

/// Transport of the initial population to time `t`, as atoms and
/// state-cell masses.
fn transported(disc: &Discretization, walker: &Walker, m0: &HybridMeasure, t: f64) -> (Vec<Atom>, Vec<f64>, f64) {
    let ch = &disc.chars;
    let state = &disc.grids.state;
    let mut atoms = Vec::new();
    let mut cells = vec![0.0; state.len()];
    let mut exit_loss = 0.0;
    for a in m0.atoms() {
        match ch.advance(a.location, t) {
            Some(z) => atoms.push(Atom { location: z, mass: a.mass * ch.survival(a.location, z) }),
            None => exit_loss += a.mass * ch.survival(a.location, ch.end()),
        }
    }
    let e = state.edges();
    for (p, &d) in m0.density().iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        walker.push_cell(e[p], e[p + 1], d, t, |piece| {
            cells[state.cell_of_clamped(piece.mid)] += piece.transport[0];
        });
        // Sources whose characteristic reaches the end of the range before t.
        let (lo, hi) = if ch.grows() {
            let first = ch.advance(ch.end(), -t).unwrap_or(ch.lo());
            (first.max(e[p]), e[p + 1])
        } else {
            let last = ch.advance(ch.end(), -t).unwrap_or(ch.hi());
            (e[p], last.min(e[p + 1]))
        };
        if t > 0.0 && lo < hi {
            exit_loss += crate::quadrature::gl8().integrate(lo, hi, |x| d * ch.survival(x, ch.end()));
        }
    }
    (atoms, cells, exit_loss)
}

/// The population at time `t`: individuals born during the run plus the
/// surviving initial population.
pub fn population_state(disc: &Discretization, history: &BirthHistory, m0: &HybridMeasure, t: f64) -> Result<PopulationSnapshot> {
    if *m0.grid() != disc.grids.state {
        return Err(Error::GridMismatch);
    }
    if *history.grid() != disc.grids.birth {
        return Err(Error::GridMismatch);
    }
    let j = history.step_of(t)?;
    let t = history.time(j);
    let walker = Walker::new(disc);
    let (atoms, mut cells, exit_loss) = transported(disc, &walker, m0, t);
    let table = history.kernel().transport();
    for i in 1..=table.bins().min(j) {
        table.accumulate(i, Some(history.cell_masses(j - i)), Some(history.cell_masses(j + 1 - i)), &mut cells);
    }
    cells.iter_mut().zip(history.atom_population(j)).for_each(|(c, v)| *c += v);
    let measure = HybridMeasure::from_cell_masses_unchecked(disc.grids.state.clone(), atoms, &cells);
    Ok(PopulationSnapshot { t, measure, exit_loss })
}

/// The stable population of the spectral result, `int e^{-r a} F psi`
/// transported along the characteristics.
pub fn stable_population(disc: &Discretization, result: &SpectralResult, tail_tol: f64) -> Result<HybridMeasure> {
    stable_population_of(disc, result.r, &result.psi, tail_tol)
}

/// As [`stable_population`] for an arbitrary birth density `psi` on the
/// birth grid.
pub fn stable_population_of(disc: &Discretization, r: f64, psi: &[f64], tail_tol: f64) -> Result<HybridMeasure> {
    let birth = &disc.grids.birth;
    if psi.len() != birth.len() {
        return Err(Error::GridMismatch);
    }
    let z0 = disc.model.z0_bound();
    if !(r > z0) {
        return Err(Error::InvalidConfig(format!("r = {r} does not exceed the decay bound {z0}")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidConfig(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
    }
    let cutoff = tail_tol.ln() / (z0 - r);
    let walker = Walker::new(disc);
    let state = &disc.grids.state;
    let step = 1.0;
    let bins = (cutoff / step).ceil() as usize;
    let mut cells = vec![0.0; state.len()];
    for ((&y, &p), &w) in birth.nodes().iter().zip(psi).zip(birth.widths()) {
        if p == 0.0 {
            continue;
        }
        walker.walk(y, 1, bins, step, r, |i, piece| {
            let disc_i = (-r * i as f64 * step).exp();
            cells[state.cell_of_clamped(piece.mid)] += p * w * disc_i * piece.transport_total();
        });
    }
    Ok(HybridMeasure::from_cell_masses_unchecked(state.clone(), Vec::new(), &cells))
}

/// Births produced by a population `m`, `int Lambda nu m`.
pub fn birth_from_population(disc: &Discretization, m: &HybridMeasure) -> Result<HybridMeasure> {
    if *m.grid() != disc.grids.state {
        return Err(Error::GridMismatch);
    }
    let model = &disc.model;
    let birth = &disc.grids.birth;
    let nb = birth.len();
    let ns = disc.grids.state.len();
    let mut atoms = Vec::new();
    let mut out = vec![0.0; nb];
    let mut tmp = vec![0.0; nb];
    for a in m.atoms() {
        let rate = a.mass * model.lambda(a.location);
        match model.offspring_atom(a.location) {
            Some((x, beta)) => {
                if x <= birth.x_hi() && rate > 0.0 {
                    atoms.push(Atom { location: x.max(birth.x_lo()), mass: rate * beta });
                }
            }
            None => {
                model.offspring_cells(a.location, birth, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += rate * v);
            }
        }
    }
    // Linear reconstruction of the density inside each cell with minmod
    // slopes, which keeps it positive and the cell averages unchanged.
    let cells = disc.cell_offspring();
    let state = &disc.grids.state;
    let dens = m.density();
    let e = state.edges();
    let mids: Vec<f64> = e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let slope = |p: usize| -> f64 {
        if p == 0 || p + 1 == ns {
            return 0.0;
        }
        let l = (dens[p] - dens[p - 1]) / (mids[p] - mids[p - 1]);
        let r = (dens[p + 1] - dens[p]) / (mids[p + 1] - mids[p]);
        if l * r <= 0.0 {
            0.0
        } else if l.abs() < r.abs() {
            l
        } else {
            r
        }
    };
    let level: Vec<f64> = dens.iter().zip(state.widths()).map(|(d, w)| d * w).collect();
    let tilt: Vec<f64> = (0..ns).map(|p| slope(p) * state.widths()[p]).collect();
    for (k, o) in out.iter_mut().enumerate() {
        let row = &cells.events[k * ns..(k + 1) * ns];
        let srow = &cells.events_slope[k * ns..(k + 1) * ns];
        let v: f64 = row.iter().zip(&level).map(|(h, c)| h * c).sum::<f64>()
            + srow.iter().zip(&tilt).map(|(h, c)| h * c).sum::<f64>();
        *o += v.max(0.0);
    }
    Ok(HybridMeasure::from_cell_masses_unchecked(birth.clone(), atoms, &out))
}

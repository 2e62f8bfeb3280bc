//! Measures made of finitely many atoms plus a piecewise-constant density.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl From<(f64, f64)> for Atom {
    fn from((location, mass): (f64, f64)) -> Self {
        Self { location, mass }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.location, a.mass)
    }
}

/// `sum_k m_k delta_{x_k} + density`, where `density[i]` is the mean density
/// over cell `i` of `grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct HybridMeasure {
    atoms: Vec<Atom>,
    density: Vec<f64>,
    grid: Arc<Grid>,
}

#[derive(Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    density: Vec<f64>,
    grid: Grid,
}

impl TryFrom<RawMeasure> for HybridMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        let n = raw.grid.len();
        let density = if raw.density.is_empty() { vec![0.0; n] } else { raw.density };
        HybridMeasure::new(Arc::new(raw.grid), raw.atoms, density)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Both measures are pure densities on the same grid, so the projected
    /// L1 norm is the exact total variation.
    ExactTv,
    GridProjectedL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureDistance {
    pub value: f64,
    pub mode: DistanceMode,
}

impl HybridMeasure {
    pub fn new(grid: Arc<Grid>, atoms: Vec<Atom>, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::InvalidMeasure(format!(
                "density has {} cells, grid has {}",
                density.len(),
                grid.len()
            )));
        }
        if let Some(d) = density.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidMeasure(format!("density value {d}")));
        }
        for a in &atoms {
            if !a.mass.is_finite() || a.mass < 0.0 || !a.location.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom ({}, {})", a.location, a.mass)));
            }
        }
        Ok(Self { atoms, density, grid })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { atoms: Vec::new(), density: vec![0.0; n], grid }
    }

    pub fn from_atoms(grid: Arc<Grid>, atoms: Vec<Atom>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, atoms, vec![0.0; n])
    }

    pub fn from_density(grid: Arc<Grid>, density: Vec<f64>) -> Result<Self> {
        Self::new(grid, Vec::new(), density)
    }

    /// Builds a density from per-cell masses. Negative round-off is clipped.
    pub(crate) fn from_cell_masses_unchecked(grid: Arc<Grid>, atoms: Vec<Atom>, masses: &[f64]) -> Self {
        let density = masses.iter().zip(grid.widths()).map(|(m, w)| (m / w).max(0.0)).collect();
        Self { atoms, density, grid }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn singular_mass(&self) -> f64 {
        self.atoms.iter().fold(0.0, |s, a| s + a.mass)
    }

    pub fn continuous_mass(&self) -> f64 {
        self.density.iter().zip(self.grid.widths()).map(|(d, w)| d * w).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.singular_mass() + self.continuous_mass()
    }

    /// Mass of each cell after the atoms are moved into their cells.
    pub fn cell_masses(&self) -> Result<Vec<f64>> {
        let mut m: Vec<f64> = self.density.iter().zip(self.grid.widths()).map(|(d, w)| d * w).collect();
        for a in &self.atoms {
            let i = self.grid.cell_of(a.location).ok_or(Error::OutOfDomain {
                x: a.location,
                lo: self.grid.x_lo(),
                hi: self.grid.x_hi(),
            })?;
            m[i] += a.mass;
        }
        Ok(m)
    }

    /// Replaces every atom by a uniform density on its containing cell.
    pub fn project_to_grid(&self) -> Result<Self> {
        let masses = self.cell_masses()?;
        Ok(Self::from_cell_masses_unchecked(self.grid.clone(), Vec::new(), &masses))
    }

    /// Singular and absolutely continuous parts.
    pub fn split(&self) -> (Self, Self) {
        let n = self.grid.len();
        let atoms = Self { atoms: self.atoms.clone(), density: vec![0.0; n], grid: self.grid.clone() };
        let ac = Self { atoms: Vec::new(), density: self.density.clone(), grid: self.grid.clone() };
        (atoms, ac)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        Self {
            atoms: self.atoms.iter().map(|a| Atom { location: a.location, mass: a.mass * factor }).collect(),
            density: self.density.iter().map(|d| d * factor).collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let density = self.density.iter().zip(&other.density).map(|(a, b)| a + b).collect();
        Ok(Self { atoms, density, grid: self.grid.clone() })
    }

    /// Writes one row per atom and one row per cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "location", "left", "right", "mass", "density"])?;
        for a in &self.atoms {
            out.write_record([
                "atom".to_string(),
                a.location.to_string(),
                a.location.to_string(),
                a.location.to_string(),
                a.mass.to_string(),
                String::new(),
            ])?;
        }
        let e = self.grid.edges();
        for (i, (&d, &x)) in self.density.iter().zip(self.grid.nodes()).enumerate() {
            out.write_record([
                "cell".to_string(),
                x.to_string(),
                e[i].to_string(),
                e[i + 1].to_string(),
                (d * self.grid.widths()[i]).to_string(),
                d.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Densities on a fixed grid sampled every `dt`, starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySeries {
    pub dt: f64,
    pub grid: Arc<Grid>,
    pub values: Vec<Vec<f64>>,
}

impl DensitySeries {
    pub fn new(dt: f64, grid: Arc<Grid>) -> Self {
        Self { dt, grid, values: Vec::new() }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// `dt * sum_j exp(-lambda t_j) b_j`
    pub fn discounted_sum(&self, lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (j, v) in self.values.iter().enumerate() {
            let f = self.dt * (-lambda * self.time(j)).exp();
            for (o, x) in out.iter_mut().zip(v) {
                *o += f * x;
            }
        }
        out
    }
}

/// L1 distance of the grid projections of `a` and `b`.
pub fn distance(a: &HybridMeasure, b: &HybridMeasure) -> Result<MeasureDistance> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let ma = a.cell_masses()?;
    let mb = b.cell_masses()?;
    let value = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum();
    let mode = if a.atoms.is_empty() && b.atoms.is_empty() {
        DistanceMode::ExactTv
    } else {
        DistanceMode::GridProjectedL1
    };
    Ok(MeasureDistance { value, mode })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::uniform(0.0, 2.0, 2).unwrap())
    }

    #[test]
    fn atom_on_an_edge_projects_upward() {
        let m = HybridMeasure::from_atoms(grid(), vec![Atom { location: 1.0, mass: 3.0 }]).unwrap();
        let p = m.project_to_grid().unwrap();
        assert_eq!(p.density(), &[0.0, 3.0]);
        assert!((p.total_mass() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn distances_of_simple_atoms() {
        let g = Arc::new(Grid::uniform(0.5, 1.5, 10).unwrap());
        let a = HybridMeasure::from_atoms(g.clone(), vec![Atom { location: 1.0, mass: 2.0 }]).unwrap();
        let b = HybridMeasure::from_atoms(g.clone(), vec![Atom { location: 1.0, mass: 1.0 }]).unwrap();
        assert_eq!(distance(&a, &b).unwrap().value, 1.0);
        let one = HybridMeasure::from_atoms(g.clone(), vec![Atom { location: 1.0, mass: 1.0 }]).unwrap();
        let next = HybridMeasure::from_atoms(g.clone(), vec![Atom { location: 1.1, mass: 1.0 }]).unwrap();
        assert_eq!(distance(&one, &next).unwrap().value, 2.0);
        assert_eq!(distance(&one, &next).unwrap().mode, DistanceMode::GridProjectedL1);
    }

    #[test]
    fn out_of_grid_atom_is_rejected() {
        let m = HybridMeasure::from_atoms(grid(), vec![Atom { location: 3.0, mass: 1.0 }]).unwrap();
        assert!(matches!(m.project_to_grid(), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = HybridMeasure::zero(grid());
        let b = HybridMeasure::zero(Arc::new(Grid::uniform(0.0, 2.0, 3).unwrap()));
        assert!(matches!(distance(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = HybridMeasure::new(grid(), vec![Atom { location: 0.5, mass: 1.5 }], vec![0.25, 1.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: HybridMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"atoms":[[0.5,-1.0]],"grid":{"x_lo":0,"x_hi":1,"n_cells":2}}"#;
        assert!(serde_json::from_str::<HybridMeasure>(bad).is_err());
        let short = r#"{"density":[1.0],"grid":{"x_lo":0,"x_hi":1,"n_cells":2}}"#;
        assert!(serde_json::from_str::<HybridMeasure>(short).is_err());
    }
}

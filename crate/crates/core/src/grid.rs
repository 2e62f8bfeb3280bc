//! Finite-volume grids on a truncated state interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Uniform,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_cells: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

/// Cells `[e_i, e_{i+1})` (the last one closed) with one node strictly
/// inside each cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    spec: GridSpec,
    edges: Vec<f64>,
    nodes: Vec<f64>,
    widths: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        g.spec
    }
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.x_lo, spec.x_hi, spec.n_cells, spec.spacing)
    }
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n_cells: usize, spacing: Spacing) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo < 0.0 || x_hi <= x_lo {
            return Err(Error::InvalidGrid(format!("bad interval [{x_lo}, {x_hi}]")));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!("need at least two cells, got {n_cells}")));
        }
        if spacing == Spacing::Geometric && x_lo <= 0.0 {
            return Err(Error::InvalidGrid("geometric spacing needs x_lo > 0".into()));
        }
        let n = n_cells as f64;
        let mut edges: Vec<f64> = (0..=n_cells)
            .map(|i| {
                let s = i as f64 / n;
                match spacing {
                    Spacing::Uniform => x_lo + (x_hi - x_lo) * s,
                    Spacing::Geometric => x_lo * (x_hi / x_lo).powf(s),
                }
            })
            .collect();
        edges[0] = x_lo;
        edges[n_cells] = x_hi;
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("cells too small to resolve".into()));
        }
        let nodes = edges
            .windows(2)
            .map(|w| match spacing {
                Spacing::Uniform => 0.5 * (w[0] + w[1]),
                Spacing::Geometric => (w[0] * w[1]).sqrt(),
            })
            .collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { spec: GridSpec { x_lo, x_hi, n_cells, spacing }, edges, nodes, widths })
    }

    pub fn uniform(x_lo: f64, x_hi: f64, n_cells: usize) -> Result<Self> {
        Self::new(x_lo, x_hi, n_cells, Spacing::Uniform)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn x_lo(&self) -> f64 {
        self.spec.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.spec.x_hi
    }

    pub fn len(&self) -> usize {
        self.spec.n_cells
    }

    pub fn is_empty(&self) -> bool {
        self.spec.n_cells == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.spec.x_lo && x <= self.spec.x_hi
    }

    /// Index of the cell containing `x`, or `None` outside the grid.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.spec.n_cells - 1))
    }

    /// Like [`Grid::cell_of`] but folds points outside the grid into the
    /// nearest boundary cell.
    pub fn cell_of_clamped(&self, x: f64) -> usize {
        if x < self.spec.x_lo {
            0
        } else if x > self.spec.x_hi {
            self.spec.n_cells - 1
        } else {
            self.cell_of(x).unwrap_or(0)
        }
    }
}

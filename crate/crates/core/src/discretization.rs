//! A model together with its truncation grids and characteristic tables.

use std::sync::{Arc, OnceLock};

use crate::characteristics::Characteristics;
use crate::error::Result;
use crate::models::{GridConfig, ModelGrids, ModelSpec};
use crate::quadrature::gl8;

#[derive(Clone, Debug)]
pub struct Discretization {
    pub model: ModelSpec,
    pub grids: ModelGrids,
    pub chars: Arc<Characteristics>,
    cells: OnceLock<Arc<CellOffspring>>,
}

/// Offspring of parents spread uniformly over a state cell, for density
/// offspring laws. Row-major, birth cells by state cells.
#[derive(Debug)]
pub(crate) struct CellOffspring {
    /// Daughters in birth cell `k` per unit parent mass in state cell `p`.
    pub daughters: Vec<f64>,
    /// The same weighted by the event rate.
    pub events: Vec<f64>,
    /// First moment of `events` about the cell midpoint, for parents whose
    /// density is linear across the cell.
    pub events_slope: Vec<f64>,
}

impl Discretization {
    pub fn new(model: ModelSpec, cfg: &GridConfig) -> Result<Self> {
        let grids = model.grids(cfg)?;
        Self::with_grids(model, grids)
    }

    pub fn with_grids(model: ModelSpec, grids: ModelGrids) -> Result<Self> {
        let chars = Arc::new(Characteristics::new(&model, grids.state.x_lo(), grids.state.x_hi())?);
        Ok(Self { model, grids, chars, cells: OnceLock::new() })
    }

    pub(crate) fn cell_offspring(&self) -> Arc<CellOffspring> {
        self.cells
            .get_or_init(|| {
                let state = &self.grids.state;
                let birth = &self.grids.birth;
                let (nb, ns) = (birth.len(), state.len());
                let mut daughters = vec![0.0; nb * ns];
                let mut events = vec![0.0; nb * ns];
                let mut events_slope = vec![0.0; nb * ns];
                let mut tmp = vec![0.0; nb];
                let e = state.edges();
                // Cuts where the offspring of a parent jump between birth
                // cells, so each sub-piece has a smooth integrand.
                let mut cuts: Vec<f64> = birth.edges().iter().flat_map(|&x| self.model.offspring_preimages(x)).collect();
                cuts.extend(self.model.breakpoints());
                cuts.sort_by(f64::total_cmp);
                for p in 0..ns {
                    let len = e[p + 1] - e[p];
                    let mid = 0.5 * (e[p] + e[p + 1]);
                    let mut pts = vec![e[p]];
                    let from = cuts.partition_point(|&c| c <= e[p]);
                    pts.extend(cuts[from..].iter().take_while(|&&c| c < e[p + 1]));
                    pts.push(e[p + 1]);
                    for piece in pts.windows(2) {
                        for (z, w) in gl8().points(piece[0], piece[1]) {
                            self.model.offspring_cells(z, birth, &mut tmp);
                            let l = self.model.lambda(z);
                            for (k, v) in tmp.iter().enumerate() {
                                daughters[k * ns + p] += w / len * v;
                                events[k * ns + p] += w / len * l * v;
                                events_slope[k * ns + p] += w / len * l * v * (z - mid);
                            }
                        }
                    }
                }
                Arc::new(CellOffspring { daughters, events, events_slope })
            })
            .clone()
    }

    /// Points along the state range where the integrands of the offspring
    /// kernels lose smoothness: birth nodes, preimages of birth-cell edges
    /// and coefficient breakpoints, sorted in the direction of the flow.
    pub(crate) fn path_breakpoints(&self, extra: &[f64]) -> Vec<f64> {
        let lo = self.grids.state.x_lo();
        let hi = self.grids.state.x_hi();
        let mut pts: Vec<f64> = vec![lo, hi];
        pts.extend_from_slice(self.grids.birth.nodes());
        for &e in self.grids.birth.edges() {
            pts.extend(self.model.offspring_preimages(e));
        }
        pts.extend(self.model.breakpoints());
        pts.extend_from_slice(extra);
        pts.retain(|&p| p >= lo && p <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if !self.chars.grows() {
            pts.reverse();
        }
        pts
    }
}

//! Piecewise integration along a single characteristic, split into age bins.

use crate::discretization::Discretization;
use crate::quadrature::gl8;

/// Contribution of one piece of a characteristic: `transport` is the
/// integral of the discounted survival in age, `offspring` the same with the
/// event rate and offspring multiplicity included. Inside an age bin both are
/// split by the linear interpolation weights `(1 - s, s)` with
/// `s = (i dt - a) / dt`, the weight on the older and on the newer birth step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Piece {
    pub mid: f64,
    pub transport: [f64; 2],
    pub offspring: [f64; 2],
}

impl Piece {
    pub fn transport_total(&self) -> f64 {
        self.transport[0] + self.transport[1]
    }
}

pub(crate) struct Walker<'a> {
    disc: &'a Discretization,
    bp: Vec<f64>,
    ascending: Vec<f64>,
    beta: f64,
}

impl<'a> Walker<'a> {
    /// Pieces break at the state-cell edges and at every point where the
    /// offspring target or the coefficients change.
    pub fn new(disc: &'a Discretization) -> Self {
        let bp = disc.path_breakpoints(disc.grids.state.edges());
        let beta = disc.model.offspring_atom(1.0).map(|(_, b)| b).unwrap_or(1.0);
        let mut ascending = bp.clone();
        ascending.sort_by(f64::total_cmp);
        Self { disc, bp, ascending, beta }
    }

    fn before(&self, a: f64, b: f64) -> bool {
        if self.disc.chars.grows() {
            a < b
        } else {
            a > b
        }
    }

    fn first_after(&self, z: f64) -> usize {
        if self.disc.chars.grows() {
            self.bp.partition_point(|&p| p <= z)
        } else {
            self.bp.partition_point(|&p| p >= z)
        }
    }

    /// Walks age bins `first..=last` (bin `i` covers ages `((i-1) dt, i dt]`)
    /// of the characteristic through `y`, weighting by
    /// `exp(-sigma (a - i dt))`. Returns the survival probability to the
    /// point where the walk stops.
    pub fn walk<V: FnMut(usize, Piece)>(
        &self,
        y: f64,
        first: usize,
        last: usize,
        dt: f64,
        sigma: f64,
        mut visit: V,
    ) -> f64 {
        let ch = &self.disc.chars;
        let model = &self.disc.model;
        let (ty, hy) = ch.coords(y);
        let Some(mut z) = ch.advance(y, (first.max(1) - 1) as f64 * dt) else {
            return 0.0;
        };
        let mut ptr = self.first_after(z);
        for bin in first.max(1)..=last {
            let target = ch.advance(y, bin as f64 * dt);
            let stop = target.unwrap_or_else(|| ch.end());
            let shift = bin as f64 * dt;
            let mut piece = |u: f64, v: f64| {
                if u == v {
                    return;
                }
                let (mut tr, mut off) = ([0.0; 2], [0.0; 2]);
                for (x, w) in gl8().points(u.min(v), u.max(v)) {
                    let (t, h) = ch.coords(x);
                    let a = t - ty;
                    let base = w * (-sigma * (a - shift) - (h - hy)).exp() / model.g(x).abs();
                    let s = ((shift - a) / dt).clamp(0.0, 1.0);
                    let l = model.lambda(x) * self.beta;
                    tr[0] += base * (1.0 - s);
                    tr[1] += base * s;
                    off[0] += base * (1.0 - s) * l;
                    off[1] += base * s * l;
                }
                visit(bin, Piece { mid: 0.5 * (u + v), transport: tr, offspring: off });
            };
            let mut cur = z;
            while ptr < self.bp.len() && self.before(self.bp[ptr], stop) {
                let p = self.bp[ptr];
                if self.before(cur, p) {
                    piece(cur, p);
                    cur = p;
                }
                ptr += 1;
            }
            piece(cur, stop);
            z = stop;
            if target.is_none() {
                break;
            }
        }
        let (_, hz) = ch.coords(z);
        (-(hz - hy)).exp()
    }
}

impl Walker<'_> {
    /// Pushes a uniform density on `[lo, hi]` forward by time `t` and
    /// reports the image in pieces. Mass carried past the end of the range
    /// is dropped.
    pub fn push_cell<V: FnMut(Piece)>(&self, lo: f64, hi: f64, density: f64, t: f64, mut visit: V) {
        let ch = &self.disc.chars;
        let model = &self.disc.model;
        let (za, zb) = (ch.advance(lo, t), ch.advance(hi, t));
        let (u, v) = if ch.grows() {
            match za {
                Some(a) => (a, zb.unwrap_or(ch.hi())),
                None => return,
            }
        } else {
            match zb {
                Some(b) => (za.unwrap_or(ch.lo()), b),
                None => return,
            }
        };
        if !(u < v) {
            return;
        }
        let mut piece = |a: f64, b: f64| {
            let (mut tr, mut off) = (0.0, 0.0);
            for (z, w) in gl8().points(a, b) {
                let xi = if t == 0.0 { z } else { ch.advance(z, -t).unwrap_or(z).clamp(lo, hi) };
                let jac = model.g(xi) / model.g(z);
                let base = w * density * jac * (-(ch.coords(z).1 - ch.coords(xi).1)).exp();
                tr += base;
                off += base * model.lambda(z);
            }
            visit(Piece { mid: 0.5 * (a + b), transport: [tr, 0.0], offspring: [off * self.beta, 0.0] });
        };
        let from = self.ascending.partition_point(|&p| p <= u);
        let mut cur = u;
        for &p in self.ascending[from..].iter().take_while(|&&p| p < v) {
            piece(cur, p);
            cur = p;
        }
        piece(cur, v);
    }
}

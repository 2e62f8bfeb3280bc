//! Random model and measure strategies shared by the property suites.
#![allow(dead_code)]

use proptest::prelude::*;
use structpop::{
    Atom, BoostingProfile, Discretization, FragmentProfile, FragmentTable, GridConfig, HybridMeasure, ModelSpec, RateFn,
};

/// A symmetric piecewise linear fragment density.
pub fn fragment_table() -> impl Strategy<Value = FragmentProfile> {
    (prop::collection::vec(0.02..0.48f64, 0..4), prop::collection::vec(0.1..3.0f64, 5)).prop_map(|(mut cuts, vals)| {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        let mut z = vec![0.0];
        z.extend(&cuts);
        z.push(0.5);
        let half: Vec<f64> = (0..z.len()).map(|k| vals[k % vals.len()]).collect();
        let mut p = half.clone();
        for k in (0..z.len() - 1).rev() {
            z.push(1.0 - z[k]);
            p.push(half[k]);
        }
        let area: f64 = (1..z.len()).map(|k| 0.5 * (p[k] + p[k - 1]) * (z[k] - z[k - 1])).sum();
        let p = p.iter().map(|v| v / area).collect();
        FragmentProfile::Tabulated(FragmentTable::new(z, p).unwrap())
    })
}

pub fn fragment() -> impl Strategy<Value = FragmentProfile> {
    prop_oneof![Just(FragmentProfile::Uniform), Just(FragmentProfile::Parabolic), fragment_table()]
}

/// Growth rates with `g(2x) < 2 g(x)`.
pub fn fission_growth() -> impl Strategy<Value = RateFn> {
    prop_oneof![
        (0.3..2.0f64).prop_map(RateFn::constant),
        (0.3..2.0f64, 0.0..0.3f64).prop_map(|(a, b)| RateFn::linear(b, a)),
        (0.5..3.0f64, 0.5..2.0f64).prop_map(|(scale, shift)| RateFn::Reciprocal { scale, shift }),
    ]
}

pub fn event_rate() -> impl Strategy<Value = RateFn> {
    prop_oneof![
        (0.3..2.0f64).prop_map(RateFn::constant),
        (0.3..2.0f64, 0.3..3.0f64).prop_map(|(max, half)| RateFn::Hill { max, half }),
    ]
}

pub fn death(max: f64) -> impl Strategy<Value = RateFn> {
    (0.0..=max).prop_map(RateFn::constant)
}

pub fn equal_fission(mu_max: f64) -> impl Strategy<Value = ModelSpec> {
    (fission_growth(), death(mu_max), event_rate()).prop_map(|(g, mu, l)| ModelSpec::equal_fission(g, mu, l).unwrap())
}

pub fn unequal_fission(mu_max: f64) -> impl Strategy<Value = ModelSpec> {
    (fragment(), fission_growth(), death(mu_max), event_rate())
        .prop_map(|(p, g, mu, l)| ModelSpec::unequal_fission(p, g, mu, l).unwrap())
}

pub fn boosting(mu_max: f64) -> impl Strategy<Value = ModelSpec> {
    (0.1..0.5f64, 0.5..2.0f64, death(mu_max))
        .prop_map(|(w, gamma, mu)| ModelSpec::waning_boosting(BoostingProfile::default(), w, gamma, mu).unwrap())
}

pub fn any_model(mu_max: f64) -> impl Strategy<Value = ModelSpec> {
    prop_oneof![equal_fission(mu_max), unequal_fission(mu_max), boosting(mu_max)]
}

pub fn disc(model: ModelSpec, n: usize) -> Discretization {
    Discretization::new(model, &GridConfig { n_cells: n, ..GridConfig::default() }).unwrap()
}

/// A few atoms and a sparse density on the state grid.
pub fn population(d: &Discretization) -> impl Strategy<Value = HybridMeasure> {
    let grid = d.grids.state.clone();
    let (lo, hi, n) = (grid.x_lo(), grid.x_hi(), grid.len());
    let atoms = prop::collection::vec((lo..hi, 0.1..2.0f64), 0..3);
    let density = prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.0..1.0f64], n);
    (atoms, density).prop_map(move |(atoms, density)| {
        let atoms = atoms.into_iter().map(|(location, mass)| Atom { location, mass }).collect();
        HybridMeasure::new(grid.clone(), atoms, density).unwrap()
    })
}

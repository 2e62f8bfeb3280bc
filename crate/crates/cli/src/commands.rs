use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use structpop::reconstruction::{population_state, stable_population, PopulationSnapshot};
use structpop::renewal::{scheme_amplitude, singular_mass_series};
use structpop::spectral::{amplitude, basic_reproduction_number, malthusian, rho_curve, RhoCurve, SpectralResult};
use structpop::validation::Severity;
use structpop::{
    distance, solve, BirthHistory, Discretization, Error, Grid, HybridMeasure, ModelSpec, RateFn, ValidationReport,
};

use crate::report::{singular_ratio, variation, CheckOutcome, ConvergenceReport, SeriesSummary, Window};
use crate::{CliError, RunConfig};

/// The discretised model after its standing assumptions were checked.
pub struct Prepared {
    pub disc: Discretization,
    pub validation: ValidationReport,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    prepare_model(cfg, cfg.model.clone())
}

fn prepare_model(cfg: &RunConfig, model: ModelSpec) -> Result<Prepared, CliError> {
    let disc = Discretization::new(model, &cfg.grid)?;
    let s = &disc.grids.state;
    let validation = disc.model.validate(s.x_lo(), s.x_hi(), cfg.spectral.validation_samples);
    if !validation.is_admissible() {
        let failed = validation.failures().filter(|c| c.severity == Severity::Fatal).map(|c| c.name.to_string()).collect();
        return Err(CliError::Assumptions(failed));
    }
    Ok(Prepared { disc, validation })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub model: String,
    pub n_cells: usize,
    pub z0_bound: f64,
    pub r: f64,
    pub r0: f64,
    pub rho_at_r: f64,
    pub eigen_residual: f64,
    pub evaluations: usize,
    pub max_escape: f64,
    pub rho_curve: RhoCurve,
    pub validation: ValidationReport,
    #[serde(skip)]
    pub result: SpectralResult,
    #[serde(skip)]
    pub birth_grid: Arc<Grid>,
}

/// Sample points for the rho curve: explicit, or spread around `r`.
pub fn curve_lambdas(cfg: &RunConfig, r: f64, z0: f64) -> Vec<f64> {
    if let Some(ls) = &cfg.spectral.lambdas {
        return ls.clone();
    }
    let span = cfg.spectral.lambda_span;
    let lo = (r - span).max(z0 + 0.01 * span);
    let hi = r + span;
    let n = cfg.spectral.lambda_points;
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn spectral(cfg: &RunConfig) -> Result<SpectralReport, CliError> {
    let Prepared { disc, validation } = prepare(cfg)?;
    let result = malthusian(&disc, cfg.spectral.solver)?;
    let ls = curve_lambdas(cfg, result.r, disc.model.z0_bound());
    let curve = rho_curve(&disc, &ls, cfg.spectral.solver.power)?;
    Ok(SpectralReport {
        model: disc.model.name().to_string(),
        n_cells: disc.grids.birth.len(),
        z0_bound: disc.model.z0_bound(),
        r: result.r,
        r0: result.r0,
        rho_at_r: result.rho_at_r,
        eigen_residual: result.eigen_residual,
        evaluations: result.evaluations,
        max_escape: result.max_escape,
        rho_curve: curve,
        validation,
        result,
        birth_grid: disc.grids.birth.clone(),
    })
}

pub struct Simulation {
    pub disc: Discretization,
    pub m0: HybridMeasure,
    pub history: BirthHistory,
    /// The spectrum used to fit the history, when the model has a growth rate.
    pub spectrum: Option<SpectralResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub model: String,
    pub steps: usize,
    pub fitting_rate: f64,
    pub final_total_mass: f64,
    pub final_singular_mass: f64,
    pub max_truncation: f64,
    pub truncation_exceeded: bool,
}

impl Simulation {
    pub fn summary(&self) -> SimulationSummary {
        let last = self.history.records().last();
        SimulationSummary {
            model: self.disc.model.name().to_string(),
            steps: self.history.len(),
            fitting_rate: self.history.config.fitting_rate,
            final_total_mass: last.map_or(0.0, |r| r.total_mass),
            final_singular_mass: last.map_or(0.0, |r| r.singular_mass),
            max_truncation: self.history.max_truncation,
            truncation_exceeded: self.history.truncation_exceeded(),
        }
    }
}

/// Solves the renewal equation, fitting the history at the Malthusian
/// parameter when one exists and at `sim.fitting_rate` otherwise.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, CliError> {
    let Prepared { disc, .. } = prepare(cfg)?;
    let spectrum = match malthusian(&disc, cfg.spectral.solver) {
        Ok(res) => Some(res),
        Err(Error::NoGrowthRate(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let m0 = cfg.initial.measure(&disc.grids.state)?;
    let mut sim = cfg.sim.clone();
    if let Some(res) = &spectrum {
        sim.fitting_rate = res.r;
    }
    let history = solve(&disc, &m0, &sim)?;
    Ok(Simulation { disc, m0, history, spectrum })
}

pub fn snapshot(s: &Simulation, step: usize) -> Result<PopulationSnapshot, CliError> {
    Ok(population_state(&s.disc, &s.history, &s.m0, s.history.time(step))?)
}

pub fn verify(cfg: &RunConfig) -> Result<(Simulation, ConvergenceReport), CliError> {
    let sim = simulate(cfg)?;
    let Some(res) = sim.spectrum.clone() else {
        return Err(Error::NoGrowthRate("verify needs a Malthusian parameter".into()).into());
    };
    let (disc, h) = (&sim.disc, &sim.history);
    let c = amplitude(disc, &res, h.forcing())?;
    let cd = scheme_amplitude(disc, &res, h)?;
    let psi = HybridMeasure::from_density(disc.grids.birth.clone(), res.psi.clone())?;
    let m_psi = stable_population(disc, &res, cfg.spectral.stable_tail_tol)?;
    let t_end = h.time(h.len() - 1);
    let v = &cfg.verify;
    let window = Window::late(t_end, v.window_fraction, v.transient_units, disc.model.z0_bound());

    let relative = |x: &HybridMeasure, target: &HybridMeasure| -> structpop::Result<f64> {
        let d = distance(x, target)?.value;
        let norm = target.total_mass();
        Ok(if norm > 0.0 { d / norm } else { d })
    };
    let (mut birth, mut birth_scheme, mut masses) = (Vec::new(), Vec::new(), Vec::new());
    let (target, target_d) = (psi.scaled(c), psi.scaled(cd));
    for j in 0..h.len() {
        let t = h.time(j);
        let b = h.entry(j).scaled((-res.r * t).exp());
        birth.push((t, relative(&b, &target)?));
        birth_scheme.push((t, relative(&b, &target_d)?));
        if window.contains(t) {
            masses.push(b.total_mass());
        }
    }
    let pop_target = m_psi.scaled(c);
    let mut population = Vec::new();
    for j in (0..h.len()).step_by(cfg.output.stride) {
        let t = h.time(j);
        let m = snapshot(&sim, j)?.measure.scaled((-res.r * t).exp());
        population.push((t, relative(&m, &pop_target)?));
    }

    let birth = SeriesSummary::new(birth, window, v.min_samples)?;
    let birth_scheme = SeriesSummary::new(birth_scheme, window, v.min_samples)?;
    let population = SeriesSummary::new(population, window, v.min_samples)?;
    let mass_variation = variation(&masses);

    let mut checks = Vec::new();
    let slope = |s: &SeriesSummary| s.fit.map(|f| f.slope);
    if let Some(b) = v.birth_slope {
        checks.push(CheckOutcome { name: "birth_slope".into(), passed: birth.slope_below(b), value: slope(&birth), threshold: b });
    }
    if let Some(b) = v.birth_final {
        checks.push(CheckOutcome {
            name: "birth_final".into(),
            passed: birth.final_relative <= b,
            value: Some(birth.final_relative),
            threshold: b,
        });
    }
    if let Some(b) = v.population_slope {
        checks.push(CheckOutcome {
            name: "population_slope".into(),
            passed: population.slope_below(b),
            value: slope(&population),
            threshold: b,
        });
    }
    if v.population_monotone {
        checks.push(CheckOutcome {
            name: "population_monotone".into(),
            passed: population.monotone,
            value: None,
            threshold: 0.0,
        });
    }
    if let Some(b) = v.mass_variation {
        checks.push(CheckOutcome {
            name: "mass_variation".into(),
            passed: mass_variation <= b,
            value: Some(mass_variation),
            threshold: b,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = ConvergenceReport {
        model: disc.model.name().to_string(),
        r: res.r,
        r0: res.r0,
        amplitude: c,
        scheme_amplitude: cd,
        birth,
        birth_scheme,
        population,
        mass_variation,
        singular_ratio: singular_ratio(&singular_mass_series(h), disc.model.z0_bound()),
        max_truncation: h.max_truncation,
        checks,
        passed,
    };
    Ok((sim, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub death: f64,
    /// Absent when `rho(K_lambda)` stays below one above the decay bound.
    pub r: Option<f64>,
    pub r0: f64,
    pub sign_law: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub model: String,
    pub points: Vec<SweepPoint>,
    pub sign_law: bool,
    pub strictly_decreasing: bool,
    pub passed: bool,
}

/// Malthusian parameter and reproduction number for each constant
/// mortality in `sweep.death`, keeping the rest of the model.
pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let base = &cfg.model;
    let mut points = Vec::new();
    for &mu in &cfg.sweep.death {
        let model = ModelSpec::with_bound(
            base.kind().clone(),
            base.growth().clone(),
            RateFn::constant(mu),
            base.event_rate().clone(),
            Some(base.z0_bound()),
        )?;
        let Prepared { disc, .. } = prepare_model(cfg, model)?;
        let (r, r0) = match malthusian(&disc, cfg.spectral.solver) {
            Ok(res) => (Some(res.r), res.r0),
            Err(Error::NoGrowthRate(_)) => (None, basic_reproduction_number(&disc, cfg.spectral.solver.power)?),
            Err(e) => return Err(e.into()),
        };
        let sign_law = match r {
            Some(r) if (r0 - 1.0).abs() < 1e-9 => r.abs() < 1e-8,
            Some(r) => (r > 0.0) == (r0 > 1.0),
            None => r0 < 1.0,
        };
        points.push(SweepPoint { death: mu, r, r0, sign_law });
    }
    // A missing root lies below the decay bound, so below every found root.
    let strictly_decreasing = points.windows(2).all(|w| match (w[0].r, w[1].r) {
        (Some(a), Some(b)) => b < a,
        (_, None) => true,
        (None, Some(_)) => false,
    });
    let sign_law = points.iter().all(|p| p.sign_law);
    Ok(SweepReport { model: base.name().to_string(), points, sign_law, strictly_decreasing, passed: sign_law && strictly_decreasing })
}

/// Writes run products into one directory.
pub struct Output<'a> {
    pub dir: &'a Path,
}

impl Output<'_> {
    pub fn create(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(self.dir).map_err(|e| CliError::io(self.dir, e))
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(BufWriter::new(File::create(&path).map_err(|e| CliError::io(&path, e))?))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&self.dir.join(name), e))
    }

    /// Writes a CSV with a header row and one row per record.
    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut w = self.file(name)?;
        let path = self.dir.join(name);
        let io = |e| CliError::io(&path, e);
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for row in rows {
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn measure(&self, name: &str, m: &HybridMeasure) -> Result<(), CliError> {
        let mut w = self.file(name)?;
        m.write_csv(&mut w)?;
        w.flush().map_err(|e| CliError::io(&self.dir.join(name), e))
    }
}

pub fn write_spectral(out: &Output, rep: &SpectralReport) -> Result<(), CliError> {
    out.json("spectral.json", rep)?;
    let g = &rep.birth_grid;
    let e = g.edges();
    out.csv(
        "stable_distribution.csv",
        &["x", "left", "right", "psi", "dual"],
        (0..g.len()).map(|i| {
            vec![
                g.nodes()[i].to_string(),
                e[i].to_string(),
                e[i + 1].to_string(),
                rep.result.psi[i].to_string(),
                rep.result.dual[i].to_string(),
            ]
        }),
    )?;
    out.csv("rho_curve.csv", &["lambda", "rho"], rep.rho_curve.points.iter().map(|(l, r)| vec![l.to_string(), r.to_string()]))
}

pub fn write_simulation(out: &Output, cfg: &RunConfig, s: &Simulation) -> Result<(), CliError> {
    out.json("simulate.json", &s.summary())?;
    s.history.write_series_csv(out.file("series.csv")?)?;
    for j in (0..s.history.len()).step_by(cfg.output.stride) {
        out.measure(&format!("snapshots/birth_{j:06}.csv"), &s.history.entry(j))?;
        if cfg.output.population {
            out.measure(&format!("snapshots/population_{j:06}.csv"), &snapshot(s, j)?.measure)?;
        }
    }
    Ok(())
}

pub fn write_verify(out: &Output, rep: &ConvergenceReport) -> Result<(), CliError> {
    out.json("verify.json", rep)?;
    let rows = rep
        .birth
        .series
        .iter()
        .zip(&rep.birth_scheme.series)
        .map(|(a, b)| vec![a.0.to_string(), a.1.to_string(), b.1.to_string()]);
    out.csv("birth_convergence.csv", &["t", "relative", "relative_scheme"], rows)?;
    out.csv(
        "population_convergence.csv",
        &["t", "relative"],
        rep.population.series.iter().map(|p| vec![p.0.to_string(), p.1.to_string()]),
    )
}

pub fn write_sweep(out: &Output, rep: &SweepReport) -> Result<(), CliError> {
    out.json("sweep.json", rep)?;
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    out.csv(
        "sweep.csv",
        &["death", "r", "r0", "sign_law"],
        rep.points.iter().map(|p| vec![p.death.to_string(), cell(p.r), p.r0.to_string(), p.sign_law.to_string()]),
    )
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use structpop_cli::commands::{self, Output};
use structpop_cli::{CliError, Manifest, RunConfig};

/// Thread count for the worker pool, overriding the number of CPUs.
const THREADS_VAR: &str = "STRUCTPOP_THREADS";

#[derive(Parser)]
#[command(name = "structpop", version, about = "Renewal equations for structured populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of grid cells; overrides `grid.n_cells`.
    #[arg(long, global = true)]
    grid_cells: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Malthusian parameter, reproduction number and stable distribution.
    Spectral,
    /// Birth history with snapshots.
    Simulate,
    /// Simulation checked against the spectral asymptotics.
    Verify,
    /// Growth rate across constant mortality levels.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectral => "spectral",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let Some(path) = &cli.config else {
        return Err(CliError::Config("--config is required".into()));
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(n) = cli.grid_cells {
        cfg.grid.n_cells = n;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    cfg.check()?;
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a count, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let log = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let dir = cfg.output.dir.clone();
    let out = Output { dir: &dir };
    out.create()?;
    out.json("manifest.json", &Manifest::new(cli.command.name(), &cfg))?;
    match cli.command {
        Command::Spectral => {
            let rep = commands::spectral(&cfg)?;
            for c in rep.validation.failures() {
                log(format!("warning: regularity check {} fails", c.name));
            }
            log(format!("{}: r = {:.9}, R0 = {:.9}", rep.model, rep.r, rep.r0));
            commands::write_spectral(&out, &rep)
        }
        Command::Simulate => {
            let sim = commands::simulate(&cfg)?;
            let s = sim.summary();
            log(format!("{}: {} steps fitted at {:.9}", s.model, s.steps, s.fitting_rate));
            if s.truncation_exceeded {
                log(format!("warning: age truncation lost {:.3e} of the births", s.max_truncation));
            }
            commands::write_simulation(&out, &cfg, &sim)
        }
        Command::Verify => {
            let (_, rep) = commands::verify(&cfg)?;
            commands::write_verify(&out, &rep)?;
            for c in &rep.checks {
                log(format!("{} {}", if c.passed { "pass" } else { "FAIL" }, c.name));
            }
            if rep.passed {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(rep.failures()))
            }
        }
        Command::Sweep => {
            let rep = commands::sweep(&cfg)?;
            commands::write_sweep(&out, &rep)?;
            for p in &rep.points {
                let r = p.r.map_or("none".to_string(), |r| format!("{r:.9}"));
                log(format!("death {}: r = {r}, R0 = {:.9}", p.death, p.r0));
            }
            let mut failed = Vec::new();
            if !rep.sign_law {
                failed.push("sign_law".to_string());
            }
            if !rep.strictly_decreasing {
                failed.push("strictly_decreasing".to_string());
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(failed))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.advice() {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

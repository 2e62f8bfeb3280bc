use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "model": {"kind": "equal_fission", "growth": {"type": "constant", "value": 1.0},
            "event_rate": {"type": "constant", "value": 1.0}},
  "grid": {"n_cells": 40},
  "sim": {"dt": 0.05, "t_final": 10.0},
  "output": {"stride": 5}
}"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_structpop"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// `SMALL` with `key` of the top level replaced.
fn with(key: &str, value: &str) -> String {
    let mut v: Value = serde_json::from_str(SMALL).unwrap();
    v[key] = serde_json::from_str(value).unwrap();
    v.to_string()
}

#[test]
fn spectral_writes_its_products() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), SMALL, &["spectral"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let rep = json(&out.join("spectral.json"));
    assert!((rep["r"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(rep["rho_curve"]["points"].as_array().unwrap().len(), 15);
    let table = fs::read_to_string(out.join("stable_distribution.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("x,left,right,psi,dual"));
    assert_eq!(table.lines().count(), 41);
    assert_eq!(fs::read_to_string(out.join("rho_curve.csv")).unwrap().lines().count(), 16);
}

#[test]
fn manifest_echoes_every_default() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), SMALL, &["spectral", "--grid-cells", "30"])), 0);
    let m = json(&dir.path().join("out/manifest.json"));
    assert_eq!(m["command"], "spectral");
    let c = &m["config"];
    assert_eq!(c["grid"]["n_cells"], 30);
    assert_eq!(c["sim"]["blowup_factor"], 100.0);
    assert_eq!(c["model"]["z0_bound"], -1.0);
    assert_eq!(c["model"]["death"]["value"], 0.0);
    assert_eq!(c["verify"]["window_fraction"], 0.4);
    assert_eq!(c["spectral"]["solver"]["power"]["tol"], 1e-13);
    // Rerunning from the manifest's configuration reproduces the run.
    let again = TempDir::new().unwrap();
    assert_eq!(code(&run(again.path(), &c.to_string(), &["spectral"])), 0);
    assert_eq!(
        fs::read(dir.path().join("out/spectral.json")).unwrap(),
        fs::read(again.path().join("out/spectral.json")).unwrap()
    );
}

#[test]
fn outputs_are_bit_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let mut first = Vec::new();
    for pass in 0..2 {
        assert_eq!(code(&run(dir.path(), SMALL, &["verify"])), 4);
        let files: Vec<Vec<u8>> = ["manifest.json", "verify.json", "birth_convergence.csv"]
            .iter()
            .map(|f| fs::read(dir.path().join("out").join(f)).unwrap())
            .collect();
        if pass == 0 {
            first = files;
        } else {
            assert_eq!(first, files);
        }
    }
}

#[test]
fn verify_reports_against_thresholds() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), SMALL, &["verify"]);
    // The amplitude bias of the left-sum Laplace transform leaves a plateau.
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("birth_slope"));
    let rep = json(&dir.path().join("out/verify.json"));
    assert_eq!(rep["passed"], false);
    assert_eq!(rep["birth"]["window"]["start"], 6.0);
    assert!(rep["birth"]["fit"]["residual"].is_number());
    let lenient = with("verify", r#"{"birth_slope": null, "population_slope": null, "population_monotone": false}"#);
    assert_eq!(code(&run(dir.path(), &lenient, &["verify"])), 0);
}

#[test]
fn zero_initial_population_passes_trivially() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &with("initial", r#"{"atoms": []}"#), &["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&dir.path().join("out/verify.json"));
    assert_eq!(rep["amplitude"], 0.0);
    for s in ["birth", "birth_scheme", "population"] {
        assert_eq!(rep[s]["max_relative"], 0.0);
        assert!(rep[s]["fit"].is_null());
    }
    let csv = fs::read_to_string(dir.path().join("out/birth_convergence.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0,0")));
}

#[test]
fn short_horizon_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &with("sim", r#"{"dt": 0.05, "t_final": 5.0}"#), &["verify"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient horizon"));
}

#[test]
fn simulate_writes_series_and_snapshots() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), SMALL, &["simulate"])), 0);
    let out = dir.path().join("out");
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(series.lines().next(), Some("t,total_mass,singular_mass,truncation_loss"));
    assert_eq!(series.lines().count(), 202);
    let snaps = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert_eq!(snaps, 2 * 41);
    let s = json(&out.join("simulate.json"));
    assert!((s["fitting_rate"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn sweep_orders_growth_by_mortality() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), SMALL, &["sweep"])), 0);
    let rep = json(&dir.path().join("out/sweep.json"));
    assert_eq!(rep["strictly_decreasing"], true);
    let r: Vec<f64> = rep["points"].as_array().unwrap().iter().map(|p| p["r"].as_f64().unwrap()).collect();
    // Constant rates: r = L - mu with L = 1.
    for (r, mu) in r.iter().zip([0.0, 0.3, 0.6, 1.0]) {
        assert!((r - (1.0 - mu)).abs() < 1e-6, "{r} at {mu}");
    }
    assert_eq!(fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap().lines().count(), 5);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    for (bad, cmd) in [
        (with("sim", r#"{"dt": -0.1}"#), "spectral"),
        (with("grid", r#"{"n_cells": 1}"#), "spectral"),
        (with("initial", r#"{"atoms": [[50.0, 1.0]]}"#), "simulate"),
        (SMALL.replace("equal_fission", "budding"), "spectral"),
        ("{".to_string(), "sweep"),
    ] {
        assert_eq!(code(&run(dir.path(), &bad, &[cmd])), 2, "{cmd} {bad}");
    }
}

#[test]
fn failed_assumption_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = with("model", r#"{"kind": "equal_fission", "growth": {"type": "constant", "value": 1.0},
        "event_rate": {"type": "linear", "slope": -0.1, "intercept": 1.0}, "z0_bound": -0.5}"#);
    let o = run(dir.path(), &cfg, &["spectral"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rates_nonnegative"));
}

#[test]
fn instability_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = with("sim", r#"{"dt": 0.1, "t_final": 2.0, "blowup_factor": 1.0001}"#);
    let o = run(dir.path(), &cfg, &["simulate"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("hint"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.json"), SMALL).unwrap();
    let status = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_structpop"))
            .args(["spectral", "--quiet", "--config"])
            .arg(dir.path().join("config.json"))
            .arg("--out")
            .arg(dir.path().join("out"))
            .env("STRUCTPOP_THREADS", threads)
            .status()
            .unwrap()
            .code()
            .unwrap()
    };
    assert_eq!(status("1"), 0);
    assert_eq!(status("many"), 2);
}

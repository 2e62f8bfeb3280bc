//! The checked-in fuzz seeds must parse, so fuzzing starts from valid inputs.

use std::fs;
use std::path::PathBuf;

use structpop::{HybridMeasure, ModelSpec};
use structpop_cli::RunConfig;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn run_config_seeds_parse() {
    for (p, text) in seeds("run_config") {
        let cfg = RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap(), cfg);
    }
}

#[test]
fn model_seeds_parse() {
    for (p, text) in seeds("model_json") {
        let m: ModelSpec = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(m.z0_bound() < 0.0);
    }
}

#[test]
fn measure_seeds_parse() {
    for (p, text) in seeds("measure_json") {
        let m: HybridMeasure = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(m.total_mass() > 0.0);
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use fracspec_cli::{dispatch, EXIT_CONFIG, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("fracspec").chain(args.iter().copied()))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const EIGEN: &str = r#"{
  "seed": 7,
  "grid": { "dim": 1, "half_width": 1.0, "cells_per_dim": 24, "ext_radius": 2.0 },
  "params": { "s": 0.4, "p": 2.0 },
  "weight": { "kind": "constant", "value": 1.0 }
}"#;

#[test]
fn eigen_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EIGEN);
    let out = dir.path().join("out");
    let code = run(&["eigen", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--levels", "2", "--oracle"]);
    assert_eq!(code, EXIT_OK);
    let result = read_json(&out.join("result.json"));
    let levels = result["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    let l1 = levels[0]["lambda"].as_f64().unwrap();
    let l2 = levels[1]["lambda"].as_f64().unwrap();
    assert!(0.0 < l1 && l1 < l2, "{l1} {l2}");
    for k in 1..=2 {
        assert!(out.join(format!("eigenfunction_{k}.csv")).is_file());
        assert!(out.join(format!("eigenfunction_{k}.svg")).is_file());
    }
    for e in result["oracle"]["relative_errors"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-4);
    }
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "seed": 3,
  "grid": { "dim": 1, "half_width": 1.0, "cells_per_dim": 16, "ext_radius": 2.0 },
  "verify": { "samples": 20, "solver_samples": 4, "restarts": 3, "levels": 2,
              "checks": ["hardy_littlewood", "homogeneity", "picone"] }
}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["all_pass"], Value::Bool(true));
    assert_eq!(report["seed"].as_u64(), Some(3));
    assert!(out.join("report.txt").is_file());
}

#[test]
fn seminorm_and_relative_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#""grid": { "dim": 1, "half_width": 1.0, "cells_per_dim": 16, "ext_radius": 2.0 }"#;
    let bump = r#"{ "kind": "bump", "radius": 0.5 }"#;
    let cfg = write_config(dir.path(), &format!(r#"{{ "seed": 1, {grid}, "function": {bump} }}"#));
    let out = dir.path().join("a");
    assert_eq!(run(&["gradient", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    let direct = read_json(&out.join("result.json"))["seminorm"].as_f64().unwrap();
    assert!(direct > 0.0);
    // gradient.csv is a grid function; read it back through a relative path
    fs::copy(out.join("gradient.csv"), dir.path().join("g.csv")).unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{ "seed": 1, {grid}, "function": {{ "kind": "from_file", "path": "g.csv" }} }}"#));
    let out = dir.path().join("b");
    assert_eq!(run(&["seminorm", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    assert!(read_json(&out.join("result.json"))["seminorm"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&[]), EXIT_USAGE);
}

#[test]
fn malformed_configs_exit_65() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing_seed = write_config(dir.path(), r#"{ "weight": { "kind": "constant", "value": 1.0 } }"#);
    assert_eq!(run(&["eigen", "--config", missing_seed.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    let broken = write_config(dir.path(), "{ \"seed\": ");
    assert_eq!(run(&["seminorm", "--config", broken.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    let unknown = write_config(dir.path(), r#"{ "seed": 1, "colour": "blue" }"#);
    assert_eq!(run(&["verify", "--config", unknown.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    let bad_params = write_config(dir.path(), r#"{ "seed": 1, "params": { "s": 1.5, "p": 2.0 }, "function": { "kind": "constant", "value": 1.0 } }"#);
    assert_eq!(run(&["seminorm", "--config", bad_params.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    let absent = dir.path().join("nope.json");
    assert_eq!(run(&["seminorm", "--config", absent.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
}

#[test]
fn remaining_subcommands_write_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "seed": 5,
  "grid": { "dim": 1, "half_width": 1.0, "cells_per_dim": 32, "ext_radius": 2.0 },
  "function": { "kind": "gaussian", "sigma": 0.3 },
  "weight": { "kind": "power_law", "alpha": 0.8 },
  "set": { "kind": "ball", "center": [0.0], "radius": 0.25 },
  "domain": { "kind": "ball", "center": [0.0], "radius": 0.75 },
  "point": [0.0],
  "lorentz": { "p": 2.0, "q": 1.5 }
}"#,
    );
    for cmd in ["rearrange", "lorentz", "capacity", "hardy-norm", "concentration"] {
        let out = dir.path().join(cmd);
        assert_eq!(run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK, "{cmd}");
        assert!(out.join("result.json").is_file(), "{cmd}");
    }
    let cap = read_json(&dir.path().join("capacity/result.json"));
    assert!(cap["capacity"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("capacity/minimizer.csv").is_file());
    let lor = read_json(&dir.path().join("lorentz/result.json"));
    assert!(lor["norm"].as_f64().unwrap() >= lor["quasi_norm"].as_f64().unwrap());
    let conc = read_json(&dir.path().join("concentration/result.json"));
    assert_eq!(conc["verdict"]["compact_indicating"], Value::Bool(false));
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EIGEN);
    let out = dir.path().join("out");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_fracspec"))
        .args(["seminorm", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("FRACSPEC_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_USAGE));
}

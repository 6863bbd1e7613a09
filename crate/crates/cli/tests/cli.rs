use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use pwaq::files::SystemFile;
use serde_json::{json, Value};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/six_mode.json")
}

fn pwaq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwaq")).args(args).env_remove("PWAQ_LP_TOL").output().unwrap()
}

fn fixture_json() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn scalar_plant(a: f64, b: f64) -> Value {
    json!({
        "state_dim": 1, "input_dim": 1, "disturbance_dim": 0,
        "total_space": {"U": [[1.0], [-1.0]], "v": [1.0, 1.0]},
        "cells": [{"U": [[1.0], [-1.0]], "v": [1.0, 1.0], "A": [[a]], "B": [[b]]}],
        "quantizer": {"delta": 0.01, "M": 1.5}
    })
}

#[test]
fn reach_on_the_fixture_is_one_based() {
    let f = fixture();
    let o = pwaq(&["reach", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["successors"][0], json!([2]));
    assert_eq!(r["successors"][2], json!([4]));
}

#[test]
fn sbar_without_controller_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture_json();
    v.as_object_mut().unwrap().remove("controller");
    let p = write_json(dir.path(), "plant.json", &v);
    let o = pwaq(&["reach", &p, "--method", "sbar"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("controller"));
}

#[test]
fn controller_free_reach_uses_the_input_polytope() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture_json();
    v.as_object_mut().unwrap().remove("controller");
    v["input_polytope"] = json!({"R": [[1.0], [-1.0]], "r": [3.0, 3.0]});
    let p = write_json(dir.path(), "plant.json", &v);
    let o = pwaq(&["reach", &p, "--method", "tfree", "--channel", "D"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["successors"].as_array().unwrap().len(), 6);
    // every cell of the fixture maps somewhere under bounded inputs
    assert!(r["successors"].as_array().unwrap().iter().all(|s| !s.as_array().unwrap().is_empty()));
}

#[test]
fn certify_fixture_passes() {
    let f = fixture();
    let o = pwaq(&["certify", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert!(r["constants"]["omega"].as_f64().unwrap() < 1.0);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn negated_lyapunov_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture_json();
    let pieces: Vec<Value> = (0..6).map(|_| json!({"P": [[-1.0, 0.0], [0.0, -1.0]]})).collect();
    v["lyapunov"] = Value::Array(pieces);
    let p = write_json(dir.path(), "bad.json", &v);
    let o = pwaq(&["certify", &p]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unstabilizable_plant_fails_synthesis() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_json(dir.path(), "toy.json", &scalar_plant(2.0, 0.0));
    let o = pwaq(&["synth", &p, "--max-iter", "10"]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn stabilizable_scalar_plant_synthesizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_json(dir.path(), "toy.json", &scalar_plant(2.0, 1.0));
    let out = dir.path().join("art.json");
    let o = pwaq(&["synth", &p, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let art: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let k = art["controller"][0]["K"][0][0].as_f64().unwrap();
    assert!((2.0 + k).abs() < 1.0, "closed loop pole {}", 2.0 + k);
}

#[test]
fn synthesis_artifact_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = pwaq(&["synth", f.to_str().unwrap(), "--confine", "1:cell2", "--confine", "3:cell4", "--confine", "all:X", "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = pwaq(&["certify", f.to_str().unwrap(), "--artifact", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["lyapunov_source"], "file");
}

#[test]
fn simulation_csv_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture_json();
    v["disturbance_dim"] = json!(2);
    for c in v["cells"].as_array_mut().unwrap() {
        c["D"] = json!([[1.0, 0.0], [0.0, 1.0]]);
    }
    let f = write_json(dir.path(), "noisy.json", &v);
    let run = |name: &str, seed: &str| {
        let csv = dir.path().join(name);
        let o = pwaq(&["simulate", &f, "--mode", "disturbed", "--x0", "-0.9,0.4", "--seed", seed, "--steps", "100", "--delta", "0.01", "--csv", csv.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(csv).unwrap()
    };
    let a = run("a.csv", "3");
    let b = run("b.csv", "3");
    let c = run("c.csv", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8_lossy(&a).starts_with("k,mode,"));
    assert!(String::from_utf8_lossy(&a).lines().next().unwrap().contains("d2"));
}

#[test]
fn state_simulation_writes_plot_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let svg = dir.path().join("t.svg");
    let o = pwaq(&["simulate", f.to_str().unwrap(), "--x0", "1,1", "--svg", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout_json(&o);
    assert_eq!(r["stop"], "converged");
    assert!(r["zoom_events"].as_u64().unwrap() > 0);
    let s = std::fs::read_to_string(svg).unwrap();
    assert_eq!(s.matches("<polygon").count(), 6);
}

#[test]
fn initial_state_outside_x_is_rejected() {
    let f = fixture();
    let o = pwaq(&["simulate", f.to_str().unwrap(), "--x0", "2,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lp_tolerance_comes_from_the_environment() {
    let f = fixture();
    let bad = Command::new(env!("CARGO_BIN_EXE_pwaq")).args(["reach", f.to_str().unwrap()]).env("PWAQ_LP_TOL", "abc").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_pwaq")).args(["reach", f.to_str().unwrap()]).env("PWAQ_LP_TOL", "1e-8").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn fixture_round_trips() {
    let sf = SystemFile::read(&fixture()).unwrap();
    let again = SystemFile::parse(&sf.to_json()).unwrap();
    assert_eq!(sf.to_json(), again.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scalar_files_round_trip(a in -3.0f64..3.0, b in -2.0f64..2.0, k in -2.0f64..2.0) {
        let mut v = scalar_plant(a, b);
        v["controller"] = json!([{"K": [[k]]}]);
        let sf = SystemFile::parse(&v.to_string()).unwrap();
        let again = SystemFile::parse(&sf.to_json()).unwrap();
        prop_assert_eq!(sf.to_json(), again.to_json());
    }
}

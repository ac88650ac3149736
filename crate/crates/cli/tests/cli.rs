use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const GOLDEN: &str = r#"{
  "walk": {"polynomial": [-1, -1, 1], "r": 1, "d": 1},
  "seed": 5,
  "bounds": {"ks": [16, 100, 1000]},
  "clt": {"n": 2000, "trials": 200}
}"#;

fn walklab(args: &[&str], dir: &Path, seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_walklab"));
    cmd.args(args).current_dir(dir).env_remove("WALKLAB_SEED");
    if let Some(s) = seed {
        cmd.env("WALKLAB_SEED", s);
    }
    cmd.output().expect("walklab runs")
}

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.json"), config).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error is JSON")
}

#[test]
fn bounds_csv_is_reproducible() {
    let dir = setup(GOLDEN);
    let p = dir.path();
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = walklab(&["bounds", "--config", "config.json", "--out", out, "--threads", threads], p, None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = walklab(&["bounds", "--config", "a/manifest.json", "--out", "c"], p, None);
    assert!(o.status.success());

    let a = fs::read(p.join("a/bounds.csv")).unwrap();
    assert_eq!(a, fs::read(p.join("b/bounds.csv")).unwrap());
    assert_eq!(a, fs::read(p.join("c/bounds.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("k,p,lower,exact,exact_method,upper,upper_H\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 4);

    let manifest = json(&p.join("a/manifest.json"));
    assert_eq!(manifest["tool"], "walklab");
    assert_eq!(manifest["config"]["seed"], 5);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let hash = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(json(&p.join("a/bounds.json"))["config_sha256"], hash);
    assert_eq!(json(&p.join("c/manifest.json"))["config_sha256"], hash);
}

#[test]
fn seed_precedence() {
    let dir = setup(GOLDEN);
    let p = dir.path();
    let run = |out: &str, seed: Option<&str>| {
        let o = walklab(&["clt", "--config", "config.json", "--out", out], p, seed);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(p.join(out).join("clt.csv")).unwrap()
    };
    let base = run("a", None);
    assert_eq!(base, run("b", Some("5")));
    assert_ne!(base, run("c", Some("6")));
    let m = json(&p.join("c/manifest.json"));
    assert_eq!(m["config"]["seed"], 6);
    assert_eq!(m["seed_source"], "env");
    assert_eq!(json(&p.join("a/manifest.json"))["seed_source"], "config");
}

#[test]
fn selector_not_summing_to_one_names_the_field() {
    let dir = setup(r#"{"walk": {"alphas": [[0.3], [0.7]], "selector": [0.5, 0.6]}}"#);
    let o = walklab(&["bounds", "--config", "config.json", "--out", "o"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o);
    assert_eq!(e["error"], "validation");
    assert_eq!(e["field"], "walk.selector");
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = setup(r#"{"walk": {"alphas": [[0.3]]}, "clt": {"n": 10, "trails": 3}}"#);
    let o = walklab(&["clt", "--config", "config.json", "--out", "o"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["field"], "clt.trails");
}

#[test]
fn caps_exit_three() {
    let dir = setup(r#"{"walk": {"polynomial": [1, -3, 0, 1], "r": 1, "d": 2}, "quality": {"h_max": 100000}}"#);
    let o = walklab(&["quality", "--config", "config.json", "--out", "o"], dir.path(), None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_of(&o)["error"], "cap_exceeded");
}

#[test]
fn construct_reports_the_lattice() {
    let dir = setup(r#"{"walk": {"polynomial": [-2, 0, 1], "r": 1, "d": 1}}"#);
    let o = walklab(&["construct", "--config", "config.json", "--out", "o"], dir.path(), None);
    assert!(o.status.success());
    let c = json(&dir.path().join("o/construct.json"));
    let alpha = c["lattice"]["alphas"][0][0].as_f64().unwrap();
    assert!((alpha - (2f64.sqrt() - 1.0)).abs() < 1e-10);
    assert!(c["relative_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn reproduce_rates() {
    let dir = TempDir::new().unwrap();
    let o = walklab(&["reproduce", "--out", "o"], dir.path(), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("o/summary.json"));
    let cases = s["cases"].as_array().unwrap();
    let get = |name: &str, key: &str| {
        cases.iter().find(|c| c["case"] == name).unwrap()[key].as_f64().unwrap()
    };
    assert_eq!(get("golden", "predicted"), -0.5);
    assert_eq!(get("cubic_rank_two", "predicted"), -1.0);
    assert_eq!(get("cubic_plane", "predicted"), -0.25);
    assert!((get("golden", "slope_exact") + 0.5).abs() <= 0.1);
    assert!(get("cubic_rank_two", "slope_upper") <= -0.85);
    assert!((get("cubic_plane", "slope_upper") + 0.25).abs() <= 0.1);
    let csv = fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    assert!(csv.starts_with("case,r,d,predicted,slope_exact,slope_upper,slope_lower,"));
    assert_eq!(csv.lines().count(), 4);
}

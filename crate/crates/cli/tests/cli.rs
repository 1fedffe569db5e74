use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coupon_embed_cli::ModelSpec;
use serde_json::Value;
use tempfile::TempDir;

const P_A: &str = r#"{"n": 2, "distribution": [{"subset": [], "prob": 0.4}, {"subset": [1], "prob": 0.2},
    {"subset": [2], "prob": 0.2}, {"subset": [1, 2], "prob": 0.2}]}"#;
const P_B: &str = r#"{"n": 2, "distribution": [{"subset": [], "prob": 0.25}, {"subset": [1], "prob": 0.35},
    {"subset": [2], "prob": 0.35}, {"subset": [1, 2], "prob": 0.05}]}"#;
const UNIT: &str = r#"{"n": 2, "distribution": [{"subset": [], "prob": 1.0}]}"#;
const SINGULAR: &str = r#"{"n": 2, "distribution": [{"subset": [1], "prob": 0.5}, {"subset": [1, 2], "prob": 0.5}]}"#;
const INDEPENDENT: &str = r#"{"n": 2, "independent": {"pi": [0.5, 0.5]}}"#;

fn write_spec(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], spec: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coupon-embed"));
    cmd.args(args);
    if let Some(spec) = spec {
        cmd.arg(spec);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn value_at(entries: &Value, mask: u64) -> f64 {
    entries
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["mask"].as_u64() == Some(mask))
        .unwrap()["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn analyze_embeddable() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let out = run(&["analyze", "--output", "json"], Some(&spec));
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["verdict"], "Embeddable");
    assert!((value_at(&report["r"], 3) - 0.10536051565782628).abs() < 1e-12);
    assert!(report["residual"]["params"].as_f64().unwrap() < 1e-12);
    assert_eq!(report["tool"]["name"], "coupon-embed");
    assert_eq!(report["tolerances"]["verdict"].as_f64(), Some(1e-10));

    let text = run(&["analyze"], Some(&spec));
    assert_eq!(text.status.code(), Some(0));
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("verdict: embeddable"));
    // Cardinality-then-mask order: {} {1} {2} {1,2}.
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(rows, vec!["{}", "{1}", "{2}", "{1,2}"]);
}

#[test]
fn analyze_exit_codes() {
    let dir = TempDir::new().unwrap();
    let pb = write_spec(&dir, "pb.json", P_B);
    let out = run(&["analyze", "--output", "json"], Some(&pb));
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert_eq!(report["witnesses"][0]["elements"], serde_json::json!([1, 2]));

    let singular = write_spec(&dir, "singular.json", SINGULAR);
    assert_eq!(run(&["analyze"], Some(&singular)).status.code(), Some(3));

    let short = write_spec(
        &dir,
        "short.json",
        r#"{"n": 2, "distribution": [{"subset": [], "prob": 0.5}, {"subset": [1], "prob": 0.4}]}"#,
    );
    let out = run(&["analyze"], Some(&short));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("sum to"));

    let malformed = write_spec(&dir, "bad.json", "{\"n\": 2,\n \"distribution\": [{\"subset\": [1], \"prob\": }]}");
    let out = run(&["analyze"], Some(&malformed));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));

    assert_eq!(run(&["analyze"], Some(Path::new("/nonexistent/spec.json"))).status.code(), Some(1));
}

#[test]
fn analyze_correlations_and_quiet() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let out = run(&["analyze", "--correlations", "2", "--output", "json"], Some(&spec));
    let report = json(&out);
    assert!((value_at(&report["correlations"], 3) - 0.04).abs() < 1e-12);
    let quiet = run(&["--quiet", "analyze"], Some(&spec));
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stdout.is_empty());
}

#[test]
fn semigroup_tables() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let out = run(&["semigroup", "--time", "1", "--output", "json"], Some(&spec));
    assert_eq!(out.status.code(), Some(0));
    let table = json(&out);
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows[0]["t"].as_f64(), Some(0.0));
    assert_eq!(value_at(&rows[0]["p"], 0), 1.0);
    for (mask, expected) in [(0, 0.4), (1, 0.2), (2, 0.2), (3, 0.2)] {
        assert!((value_at(&rows[1]["p"], mask) - expected).abs() < 1e-12);
    }

    let ind = write_spec(&dir, "ind.json", INDEPENDENT);
    let out = run(&["semigroup", "--time", "2", "--output", "json"], Some(&ind));
    let table = json(&out);
    let p2 = &table["rows"][1]["p"];
    for (mask, expected) in [(0, 0.0625), (1, 0.1875), (2, 0.1875), (3, 0.5625)] {
        assert!((value_at(p2, mask) - expected).abs() < 1e-12);
    }

    let csv = run(&["semigroup", "--grid", "0..1:2"], Some(&spec));
    let csv = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("t,p{},p{1},p{2},\"p{1,2}\""));

    let pb = write_spec(&dir, "pb.json", P_B);
    assert_eq!(run(&["semigroup", "--time", "1"], Some(&pb)).status.code(), Some(2));
    assert_eq!(run(&["semigroup"], Some(&spec)).status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let args = ["simulate", "--trials", "20000", "--seed", "7", "--output", "json"];
    let a = run(&args, Some(&spec));
    let b = run(&args, Some(&spec));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert!(report["transition"]["max_deviation"].as_f64().unwrap() < 0.02);

    let single = Command::new(env!("CARGO_BIN_EXE_coupon-embed"))
        .args(args)
        .arg(&spec)
        .env("COUPON_EMBED_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(single.stdout, a.stdout);

    let unit = write_spec(&dir, "unit.json", UNIT);
    let report = json(&run(&["simulate", "--trials", "1000", "--output", "json"], Some(&unit)));
    assert_eq!(report["marginal"]["max_deviation"].as_f64(), Some(0.0));
    assert_eq!(report["transition"]["max_deviation"].as_f64(), Some(0.0));
}

#[test]
fn simulate_continuous_and_trajectory() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let traj = dir.path().join("traj.csv");
    let out = run(
        &[
            "simulate",
            "--mode",
            "continuous",
            "--trials",
            "20000",
            "--trajectory",
            traj.to_str().unwrap(),
            "--output",
            "json",
        ],
        Some(&spec),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["marginal"]["max_deviation"].as_f64().unwrap() < 0.02);
    let csv = std::fs::read_to_string(&traj).unwrap();
    assert!(csv.starts_with("step_or_time,state_mask,state_elements\n0,0,\n"));

    let pb = write_spec(&dir, "pb.json", P_B);
    assert_eq!(
        run(&["simulate", "--mode", "continuous"], Some(&pb)).status.code(),
        Some(2)
    );
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "pa.json", P_A);
    let out = run(&["verify", "--level", "full"], Some(&spec));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("all checks passed"));

    let out = run(&["verify", "--random", "5", "100", "3", "--level", "quick"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let out = run(&["verify", "--inject-fault", "--output", "json"], Some(&spec));
    assert_eq!(out.status.code(), Some(4));
    let report = json(&out);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["generator_exponential"]);
}

#[test]
fn spec_round_trip() {
    for text in [P_A, P_B, INDEPENDENT, r#"{"n": 3, "rates": [{"subset": [1, 3], "rate": 0.7}]}"#] {
        let spec = ModelSpec::from_json(text).unwrap();
        let again = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.validate().unwrap(), again.validate().unwrap());
    }
    let p = ModelSpec::from_json(P_A).unwrap().validate().unwrap();
    let rebuilt = ModelSpec::from_distribution(p.distribution());
    assert_eq!(rebuilt.validate().unwrap(), p);
}

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jetcartan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn report(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut all: Vec<&str> = args.to_vec();
    let path = out.to_string_lossy().into_owned();
    all.extend(["--report", &path]);
    let o = run(&all);
    let text = std::fs::read_to_string(&out).unwrap_or_else(|_| {
        panic!("no report; stderr: {}", String::from_utf8_lossy(&o.stderr))
    });
    (o.status.code().unwrap(), serde_json::from_str(&text).unwrap())
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("missing {name}"))
}

#[test]
fn algebra_suite_passes_with_documented_layout() {
    let (code, r) = report(&["verify", "--suite", "algebra", "--dim", "4", "--samples", "50", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(r["pass"], true);
    for key in ["version", "config", "checks", "pass"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["config"]["seed"], 7);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 25);
    for c in checks {
        for key in ["name", "family", "samples", "max_residual", "tolerance", "pass", "seconds"] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
        assert!(c["max_residual"].as_f64().unwrap() <= 1e-9);
    }
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn identical_seeds_give_identical_reports() {
    let strip = |mut r: Value| {
        for c in r["checks"].as_array_mut().unwrap() {
            c["seconds"] = Value::from(0.0);
        }
        r
    };
    let args = ["verify", "--suite", "frame", "--dim", "3", "--samples", "5", "--seed", "11"];
    let (_, a) = report(&args);
    let (_, b) = report(&args);
    assert_eq!(strip(a), strip(b));
}

#[test]
fn schwarzschild_passes_and_de_sitter_is_a_negative_control() {
    let schw = fixture("schwarzschild.json");
    let ds = fixture("desitter.json");
    let (code, r) = report(&["verify", "--suite", "unimodular", "--scenario", &schw, "--scenario", &ds, "--samples", "10"]);
    assert_eq!(code, 0, "{r:#}");
    let e = check(&r, "unimodular.schwarzschild.einstein");
    assert_eq!(e["pass"], true);
    assert!(e["max_residual"].as_f64().unwrap() <= 1e-6);
    let d = check(&r, "unimodular.desitter.einstein.negative_control");
    assert_eq!(d["pass"], true);
    assert!(d["max_residual"].as_f64().unwrap() > 0.5);
    assert_eq!(check(&r, "unimodular.desitter.traceless_einstein")["pass"], true);
}

#[test]
fn failing_checks_exit_with_one() {
    let (code, r) = report(&["verify", "--suite", "algebra", "--samples", "5", "--tol", "0"]);
    assert_eq!(code, 1);
    assert_eq!(r["pass"], false);
}

#[test]
fn usage_and_scenario_errors_exit_with_two() {
    assert_eq!(run(&["verify", "--suite", "everything"]).status.code(), Some(2));
    assert_eq!(run(&["verify"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pole.json");
    std::fs::write(
        &path,
        r#"{"jetcartan_scenario": 1, "name": "pole", "dim": 2, "signature": [1, 1],
            "coordinates": ["r", "t"], "params": {"M": 1.0},
            "vielbein": [["1/sqrt(1-2*M/r)", "0"], ["0", "1"]],
            "region": {"r": [1, 3], "t": [0, 1]}}"#,
    )
    .unwrap();
    let o = run(&["verify", "--suite", "palatini", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("r=2"));
    let o = run(&["verify", "--suite", "palatini", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

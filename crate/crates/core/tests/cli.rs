use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_subsidy-mte")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    Command::new(bin())
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("SUBSIDY_MTE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn error_line(o: &Output) -> Value {
    let s = String::from_utf8_lossy(&o.stderr);
    let line = s.lines().last().expect("stderr line");
    serde_json::from_str(line).expect("stderr is one JSON line")
}

fn benchmark_sim(n: usize, seed: u64, z: Value) -> Value {
    json!({
        "model": {
            "kind": "normal",
            "params": "benchmark",
            "x": { "kind": "cells", "points": [[1.0], [0.0]], "weights": [0.5, 0.5] },
            "z": z
        },
        "n": n,
        "seed": seed
    })
}

#[test]
fn simulate_writes_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", &benchmark_sim(20_000, 3, json!({"kind": "uniform", "lo": 0.0, "hi": 900.0})));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("simulate", &cfg, &a).status.code(), Some(0));
    assert_eq!(run("simulate", &cfg, &b).status.code(), Some(0));
    let csv_a = std::fs::read(a.join("data.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("data.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("truth.json")).unwrap(), std::fs::read(b.join("truth.json")).unwrap());
    let rows = String::from_utf8(csv_a).unwrap().lines().count() - 1;
    assert_eq!(rows, 20_000);
    let truth = read(&a.join("truth.json"));
    assert!((truth["mte_slope"].as_f64().unwrap() - 1523.18668733).abs() < 1e-6);
    assert_eq!(truth["knots"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_rejects_zero_rows_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n0.json", &benchmark_sim(0, 1, json!({"kind": "constant", "value": 0.0})));
    let o = run("simulate", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["exit_code"], 2);
    let mut v = benchmark_sim(10, 1, json!({"kind": "constant", "value": 0.0}));
    v["colour"] = json!(1);
    let cfg = write_config(dir.path(), "extra.json", &v);
    let o = run("simulate", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "schema");
}

#[test]
fn simulate_reports_simulation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "model": {
            "kind": "generalized_roy",
            "utility": { "delta": 1.0, "z": 1.0 },
            "delta": { "kind": "normal", "mean": 0.0, "sd": 1.0 },
            "v": { "kind": "normal", "mean": 0.0, "sd": 1.0 },
            "x": { "kind": "independent", "components": [{ "kind": "normal", "mean": 0.0, "sd": 1.0 }] },
            "z": { "kind": "uniform", "lo": 0.0, "hi": 1.0 }
        },
        "n": 100
    });
    let cfg = write_config(dir.path(), "roy.json", &v);
    let o = run("simulate", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_line(&o)["error"], "simulation");
}

#[test]
fn estimate_benchmark_names_and_liv_two_arm() {
    let dir = tempfile::tempdir().unwrap();
    let sim = write_config(dir.path(), "sim.json", &benchmark_sim(50_000, 11, json!({"kind": "uniform", "lo": 0.0, "hi": 900.0})));
    assert_eq!(run("simulate", &sim, &dir.path().join("sim")).status.code(), Some(0));
    let est = write_config(
        dir.path(),
        "est.json",
        &json!({ "data": "sim/data.csv", "estimators": ["heckman", "liv", "concave"], "x_names": ["medical"] }),
    );
    let o = run("estimate", &est, &dir.path().join("est"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = read(&dir.path().join("est/fit.json"));
    let table = fit["heckman"]["table"].as_object().unwrap();
    for k in ["choice.intercept", "choice.medical", "choice.subsidy", "y1.medical", "y0.intercept", "rho1", "sigma0"] {
        assert!(table.contains_key(k), "{k}");
    }
    assert!(dir.path().join("est/mte_curve.csv").exists() && dir.path().join("est/mte.svg").exists());

    let two = write_config(dir.path(), "two.json", &benchmark_sim(20_000, 5, json!({"kind": "discrete", "values": [0.0, 900.0], "weights": [0.5, 0.5]})));
    assert_eq!(run("simulate", &two, &dir.path().join("two")).status.code(), Some(0));
    let est = write_config(dir.path(), "est2.json", &json!({ "data": "two/data.csv", "estimators": ["liv"] }));
    let o = run("estimate", &est, &dir.path().join("est2"));
    assert_eq!(o.status.code(), Some(0));
    let fit = read(&dir.path().join("est2/fit.json"));
    let liv = &fit["liv"];
    let identified = if liv["fit"].is_null() {
        0
    } else {
        liv["fit"]["cells"].as_array().unwrap().iter().flat_map(|c| c["estimate"].as_array().unwrap()).filter(|v| !v.is_null()).count()
    };
    let warnings = if liv["fit"].is_null() { &liv["warnings"] } else { &liv["fit"]["warnings"] };
    assert!(identified <= 10, "{identified}");
    assert!(!warnings.as_array().unwrap().is_empty());
}

#[test]
fn estimate_missing_column_is_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "y,d,x1\n1,0,1\n").unwrap();
    let est = write_config(dir.path(), "est.json", &json!({ "data": "bad.csv" }));
    let o = run("estimate", &est, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_toy_and_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &configs().join("solve_toy.json"), &dir.path().join("toy"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rule = read(&dir.path().join("toy/rule.json"));
    let z: Vec<f64> = rule["assignment"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (a, b) in z.iter().zip([1.0, 0.7, 0.4]) {
        assert!((a - b).abs() < 1e-6, "{z:?}");
    }
    for f in ["solve.json", "solve.csv", "welfare.json", "policy.svg"] {
        assert!(dir.path().join("toy").join(f).exists(), "{f}");
    }

    let o = run("solve", &configs().join("solve_benchmark.json"), &dir.path().join("t1"));
    assert_eq!(o.status.code(), Some(0));
    let s = read(&dir.path().join("t1/solve.json"));
    let med = &s["results"][0];
    assert_eq!(med["kind"], "interior");
    assert!((med["z_star"].as_f64().unwrap() - 375.0).abs() <= 120.0);
}

#[test]
fn negative_selection_needs_zero_cost() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = json!({
        "model": {
            "source": "inline",
            "mte": { "form": { "kind": "poly_lambda_prime", "level_coef": [-0.5], "lambda_prime": [0.0, 2.0] }, "shape": "increasing" },
            "propensity": { "kind": "linear", "intercept": 0.25, "gamma": 0.5 }
        },
        "cells": [{ "weight": 1.0 }],
        "action_space": [0.0, 1.0],
        "cost": { "kind": "voucher" },
        "method": "negative",
        "svg": false
    });
    let cfg = write_config(dir.path(), "neg.json", &v);
    let o = run("solve", &cfg, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_line(&o)["error"], "computation");
    v["cost"] = json!({ "kind": "zero" });
    let cfg = write_config(dir.path(), "neg0.json", &v);
    let o = run("solve", &cfg, &dir.path().join("o0"));
    assert_eq!(o.status.code(), Some(0));
    let s = read(&dir.path().join("o0/solve.json"));
    assert_eq!(s["results"][0]["kind"], "corner_high");
}

#[test]
fn compare_decreasing_attains_first_best() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("compare", &configs().join("compare_decreasing.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let l = read(&dir.path().join("ladder.json"));
    assert_eq!(l["cells"][0]["first_best_attained"], true);
}

#[test]
fn rank_demo_and_identical_rules() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("rank", &configs().join("rank_demo.json"), &dir.path().join("demo"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read(&dir.path().join("demo/verdicts.json"));
    assert_eq!(v["edges"].as_array().unwrap().len(), 2);
    assert_eq!(v["incomparable"].as_array().unwrap().len(), 1);
    let dot = std::fs::read_to_string(dir.path().join("demo/hasse.dot")).unwrap();
    assert!(dot.starts_with("digraph") && dot.contains("dashed"));

    let mut cfg = read(&configs().join("rank_demo.json"));
    cfg["rules"] = json!([{ "name": "p", "assignment": [0.3, 0.4] }, { "name": "q", "assignment": [0.3, 0.4] }]);
    let p = write_config(dir.path(), "same.json", &cfg);
    assert_eq!(run("rank", &p, &dir.path().join("same")).status.code(), Some(0));
    let v = read(&dir.path().join("same/verdicts.json"));
    assert_eq!(v["verdicts"][0]["verdict"], "equivalent");

    cfg["set"]["set"]["cells"][0]["pinned"] = json!([5.0, null, null, null, null, null, null, 6.0]);
    let p = write_config(dir.path(), "empty.json", &cfg);
    let o = run("rank", &p, &dir.path().join("empty"));
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        assert_eq!(run("solve", &configs().join("solve_benchmark.json"), &dir.path().join(name)).status.code(), Some(0));
    }
    for f in ["solve.json", "rule.json", "welfare.json", "solve.csv"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

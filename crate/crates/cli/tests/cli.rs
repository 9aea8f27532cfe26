use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{"n_policies": 3000, "n_foreign": 6, "n_unresolved": 12, "common_set_size": 120}"#;

fn streetrisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetrisk"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = streetrisk(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, seed: &str) {
    fs::write(dir.join("small.json"), SMALL).unwrap();
    ok(dir, &["synth", "--config", "small.json", "--out", "data", "--seed", seed]);
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

#[test]
fn evaluate_writes_one_plot_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3");
    ok(dir.path(), &["evaluate", "--dataset", "data", "--out", "g.json", "--plot", "g.csv"]);
    let plot = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines[0], "trial_index,gini_A,gini_B,gini_C");
    assert_eq!(lines.len(), 21);
    for (k, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], k.to_string());
        for c in &cells[1..] {
            let g: f64 = c.parse().unwrap();
            assert!((-1.0..=1.0).contains(&g));
        }
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(report["trials"].as_array().unwrap().len(), 20);
}

#[test]
fn fit_and_evaluate_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let args = ["evaluate", "--dataset", "data", "--trials", "4", "--seed", "9", "--out", "r.json", "--plot", "p.csv"];
    ok(dir.path(), &args);
    let first = fs::read(dir.path().join("r.json")).unwrap();
    ok(dir.path(), &args);
    assert_eq!(first, fs::read(dir.path().join("r.json")).unwrap());

    let a = ok(dir.path(), &["fit", "--dataset", "data"]);
    let b = ok(dir.path(), &["fit", "--dataset", "data"]);
    assert_eq!(a, b);
    let model: Value = serde_json::from_str(&a).unwrap();
    assert!(model["model"]["converged"].as_bool().unwrap());
}

#[test]
fn unanimous_labels_give_kappa_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut csv = String::from(
        "address_id,annotator_id,timestamp,neighbourhood,density,sv_quality,house_type,house_age,house_condition,wealth\n",
    );
    let rows = [
        ("A1", "green_space", 1, "good", "detached_single_family", 1, 1, 2),
        ("A2", "terraced_houses", 3, "bad", "terraced", 2, 3, 5),
        ("A3", "green_space", 5, "good", "detached_single_family", 3, 2, 9),
    ];
    for rater in ["r1", "r2", "r3"] {
        for (addr, nb, dens, sv, ht, age, cond, wealth) in rows {
            csv.push_str(&format!(
                "{addr},{rater},2019-03-02T10:00:00Z,{nb},{dens},{sv},{ht},{age},{cond},{wealth}\n"
            ));
        }
    }
    fs::write(p.join("ann.csv"), csv).unwrap();
    fs::write(p.join("common.txt"), "A1\nA2\nA3\n").unwrap();
    let out = ok(p, &["kappa", "--annotations", "ann.csv", "--common", "common.txt", "--format", "json"]);
    let report: Value = serde_json::from_str(&out).unwrap();
    for row in report["rows"].as_array().unwrap() {
        assert_eq!(row["kappa"].as_f64(), Some(1.0), "{row}");
        assert_eq!(row["band"], "almost_perfect");
    }
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = streetrisk(dir.path(), &["fit", "--dataset", "missing"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");

    let out = streetrisk(dir.path(), &["evaluate", "--trials", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");

    fs::write(dir.path().join("bad.json"), "{").unwrap();
    let out = streetrisk(dir.path(), &["synth", "--config", "bad.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("bad.json"), "{err}");
}

#[test]
fn geocode_and_fetch_against_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "5");
    let before = fs::read(p.join("data/addresses.csv")).unwrap();
    let out = ok(p, &["geocode", "--addresses", "data/addresses.csv", "--fixtures", "data/imagery", "--out", "geo.csv"]);
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["summary"]["foreign"], 6);
    assert_eq!(summary["summary"]["unresolved"], 12);
    assert_eq!(fs::read(p.join("geo.csv")).unwrap(), before);

    let args = [
        "fetch-images", "--addresses", "data/addresses.csv", "--fixtures", "data/imagery",
        "--cache", "cache", "--only", "data/common.txt", "--rate", "0",
    ];
    let first: Value = serde_json::from_str(&ok(p, &args)).unwrap();
    let requests = first["requests"].as_u64().unwrap();
    assert_eq!(requests, 240);
    assert_eq!(first["images"].as_u64().unwrap() + first["missing_imagery"].as_u64().unwrap(), requests);
    // rerun is served from the cache with the same outcome
    let second: Value = serde_json::from_str(&ok(p, &args)).unwrap();
    assert_eq!(first, second);
}

#[test]
fn fetch_without_a_provider_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6");
    let out = streetrisk(dir.path(), &["fetch-images", "--addresses", "data/addresses.csv", "--cache", "c"]);
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn live_mode_needs_the_key_variable() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "7");
    let out = Command::new(env!("CARGO_BIN_EXE_streetrisk"))
        .args(["geocode", "--addresses", "data/addresses.csv", "--live"])
        .env_remove("STREETRISK_MAPS_KEY")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("STREETRISK_MAPS_KEY"), "{err}");
}

#[test]
fn calibrate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "8");
    let out = ok(p, &[
        "calibrate", "--annotations", "data/annotations.csv", "--common", "data/common.txt",
        "--out", "cal.csv", "--map", "map.json",
    ]);
    let summary: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["annotators"], serde_json::json!(["ann1", "ann2", "ann3", "ann4"]));
    let map: Value = serde_json::from_str(&fs::read_to_string(p.join("map.json")).unwrap()).unwrap();
    assert!(map["variables"].as_array().unwrap().iter().any(|v| v["variable"] == "house_age"));

    let md = ok(p, &["report", "--dataset", "data", "--annotations", "cal.csv", "--no-calibrate", "--trials", "3"]);
    assert!(md.starts_with("# "));
    assert!(md.contains("house_condition"));
}

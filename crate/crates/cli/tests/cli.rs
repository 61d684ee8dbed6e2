use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepmobility")).args(args).output().unwrap()
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["train", "--data", "x.csv"]).status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn header_only_dataset_is_an_empty_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("dataset.csv");
    let header = deepmobility_core::dataset::csv_columns().join(",");
    std::fs::write(&data, format!("{header}\n")).unwrap();
    let out = bin(&["train", "--data", &s(&data), "--out", &s(&dir.path().join("m.json")), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out));
    assert!(text(&out).contains("empty training set"), "{}", text(&out));
}

#[test]
fn bad_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("bad.toml");
    std::fs::write(&sc, "[scenario]\nname = \"x\"\nduration_s = -1.0\ntick_ms = 120\nseed = 1\n").unwrap();
    let out = bin(&["gen-dataset", "--scenario", &s(&sc), "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    let out = bin(&["gen-dataset", "--scenario", "no-such-scenario", "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
}

#[test]
fn corridor_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let model = d.join("model.json");
    let out = bin(&["gen-dataset", "--scenario", "corridor", "--out", &s(&data)]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(data.join("dataset.csv.manifest.json").exists());

    let out = bin(&["train", "--data", &s(&data), "--out", &s(&model), "--epochs", "2", "--seed", "3"]);
    assert!(out.status.success(), "{}", text(&out));
    let history = std::fs::read_to_string(d.join("model.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["command"], "train");

    let out = bin(&["eval", "--model", &s(&model), "--data", &s(&data)]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).starts_with("windows 300 "), "{}", text(&out));

    let report = d.join("sim.csv");
    let policy = format!("deep:{}", s(&model));
    let out = bin(&["simulate", "--scenario", "corridor", "--policy", &policy, "--report", &s(&report)]);
    assert!(out.status.success(), "{}", text(&out));
    let decisions = std::fs::read_to_string(d.join("sim.decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 1 + 3 * 1000);
    assert!(d.join("sim.events.csv").exists());

    let cmp = d.join("cmp.csv");
    let out = bin(&[
        "compare", "--scenario", "corridor", "--policies", "a3,greedy,deep", "--model", &s(&model), "--report",
        &s(&cmp),
    ]);
    assert!(out.status.success(), "{}", text(&out));
    let table = std::fs::read_to_string(d.join("cmp.txt")).unwrap();
    for p in ["a3", "greedy", "deep"] {
        assert!(table.contains(p), "{table}");
    }
    assert_eq!(std::fs::read_to_string(d.join("cmp.runs.csv")).unwrap().lines().count(), 4);
}

#[test]
fn deep_policy_without_model_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "--scenario", "corridor", "--policy", "deep", "--report", &s(&dir.path().join("r.csv"))]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
}

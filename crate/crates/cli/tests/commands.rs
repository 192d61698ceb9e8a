use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dane")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dane(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn trained(root: &Path) {
    let (data, model) = (root.join("data"), root.join("model"));
    ok(&["generate", "--nodes", "32", "--communities", "2", "--snapshots", "5", "--attr-dim", "4", "--seed", "3", "--out", p(&data)]);
    ok(&["train", "--data", p(&data), "--out", p(&model), "--seed", "3", "--dim", "6", "--epochs", "2"]);
}

#[test]
fn generate_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    trained(root);
    assert!(root.join("data/meta.json").exists());
    assert!(root.join("data/manifest.json").exists());
    let log = fs::read_to_string(root.join("model/training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("model/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 3);

    let (data, model) = (root.join("data"), root.join("model"));
    let csv = ok(&["eval-link", "--data", p(&data), "--model", p(&model), "--repeats", "2", "--out", p(&root.join("link"))]);
    assert!(csv.starts_with("metric,mean,std,repeats\n"));
    assert!(csv.contains("roc_auc,"));
    assert_eq!(csv, fs::read_to_string(root.join("link/report.csv")).unwrap());

    let json = ok(&["eval-node", "--data", p(&data), "--model", p(&model), "--repeats", "2", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(report["metrics"].is_array());
}

#[test]
fn fine_tune_and_dump_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    trained(root);
    let (data, model) = (root.join("data"), root.join("model"));
    ok(&["fine-tune", "--data", p(&data), "--model", p(&model), "--out", p(&root.join("tuned")), "--steps", "3"]);
    let base = fs::read_to_string(model.join("model.json")).unwrap();
    let tuned = fs::read_to_string(root.join("tuned/model.json")).unwrap();
    assert_ne!(base, tuned);

    let emb = root.join("emb.csv");
    ok(&["dump-embeddings", "--data", p(&data), "--model", p(&model), "--out", p(&emb), "--timestamp", "2"]);
    let text = fs::read_to_string(&emb).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 3 + 6);
    // three layers by default, plus the input projection as layer 0
    assert_eq!(lines.count(), 32 * 4);
    assert!(root.join("emb.csv.manifest.json").exists());

    let pred = root.join("pred.csv");
    ok(&["dump-embeddings", "--data", p(&data), "--model", p(&model), "--out", p(&pred), "--predicted"]);
    let text = fs::read_to_string(&pred).unwrap();
    assert!(text.lines().next().unwrap().ends_with("predicted"));
    assert!(text.lines().nth(1).unwrap().starts_with("0,5,0,"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    trained(root);
    let csv = ok(&[
        "sweep", "--data", p(&root.join("data")), "--out", p(&root.join("sweep")), "--param", "L", "--values", "1,2",
        "--repeats", "1", "--seed", "1", "--dim", "4", "--epochs", "1",
    ]);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("L,1,roc_auc,"));
    assert!(root.join("sweep/sweep.csv").exists());
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(dane(&["train", "--data", p(&missing), "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(dane(&["frobnicate"]).status.code(), Some(2));

    trained(dir.path());
    let data = dir.path().join("data");
    assert_eq!(dane(&["train", "--data", p(&data), "--out", p(dir.path()), "--dim", "0"]).status.code(), Some(2));
    fs::write(data.join("t002.edges"), "0 999\n").unwrap();
    let out = dane(&["eval-link", "--data", p(&data), "--model", p(&dir.path().join("model"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t002.edges"));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn trignet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trignet")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn fixtures(dir: &Path) {
    let o = trignet(&["gen-fixtures", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn eval_without_checkpoint_is_a_usage_error() {
    let o = trignet(&["eval", "--dataset", "x.jsonl", "--dict", "d.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing --checkpoint"));
}

#[test]
fn user_errors_do_not_panic() {
    let o = trignet(&["train", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = trignet(&[
        "build-graph",
        "--dataset",
        "/nonexistent.jsonl",
        "--dict",
        "/nonexistent.txt",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
    assert!(!stderr(&o).contains("panicked"));
    let o = trignet(&["profile", "--d", "10", "--K", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("heads"));
}

#[test]
fn gradcheck_tiny_passes() {
    let o = trignet(&["gradcheck", "--tiny"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let err: f64 = out
        .split_whitespace()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .expect("max relative error printed");
    assert!(err < 1e-4);
    let o = trignet(&["gradcheck", "--tiny", "--threshold", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn profile_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("profile.json");
    let o = trignet(&[
        "profile",
        "--r",
        "50",
        "--n",
        "15",
        "--max-nodes",
        "500",
        "--d",
        "768",
        "--K",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let json: Value = serde_json::from_str(&stdout[stdout.find('{').unwrap()..]).unwrap();
    assert!(json["flops_flow"].as_u64().unwrap() < json["flops_vanilla"].as_u64().unwrap());
    assert_eq!(json, read_json(&out));
    assert!(stdout.contains("flow_gat") && stdout.contains("vanilla_gat"));
}

#[test]
fn build_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    fixtures(&fx);
    let p = |name: &str| fx.join(name).to_str().unwrap().to_string();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = trignet(&[
        "build-graph",
        "--dataset",
        &p("train.jsonl"),
        "--dict",
        &p("dict.txt"),
        "--embeddings",
        &p("embeddings.txt"),
        "--out",
        out_s,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats = read_json(&out.join("graph_stats.json"));
    assert_eq!(stats["users"].as_array().unwrap().len(), 32);
    assert_eq!(stats["seed"], stats["config"]["seed"]);
    let graphs: Vec<_> = std::fs::read_dir(out.join("graphs")).unwrap().collect();
    assert_eq!(graphs.len(), 32);

    let o = trignet(&[
        "train",
        "--dataset",
        &p("train.jsonl"),
        "--val",
        &p("val.jsonl"),
        "--dict",
        &p("dict.txt"),
        "--embeddings",
        &p("embeddings.txt"),
        "--out",
        out_s,
        "--epochs",
        "3",
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let history = read_json(&out.join("history.json"));
    assert_eq!(history["seed"], 5);
    assert_eq!(history["config"]["epochs"], 3);
    assert_eq!(history["history"].as_array().unwrap().len(), 3);
    let weights = read_json(&out.join("layer_weights.json"));
    let w: f64 = weights["layer_weights"]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((w - 1.0).abs() < 1e-12);

    let eval_out = dir.path().join("eval");
    let o = trignet(&[
        "eval",
        "--dataset",
        &p("val.jsonl"),
        "--dict",
        &p("dict.txt"),
        "--embeddings",
        &p("embeddings.txt"),
        "--checkpoint",
        out.join("checkpoint.txt").to_str().unwrap(),
        "--out",
        eval_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&eval_out.join("eval.json"));
    assert_eq!(report["seed"], 5);
    assert_eq!(report["report"]["per_trait_f1"].as_array().unwrap().len(), 4);
}

#[test]
fn drop_category_must_exist() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let o = trignet(&[
        "build-graph",
        "--dataset",
        &p("val.jsonl"),
        "--dict",
        &p("dict.txt"),
        "--drop-category",
        "nonsense",
        "--out",
        &p("out"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonsense"));
}

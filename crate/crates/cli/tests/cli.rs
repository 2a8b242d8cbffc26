use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn ids(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ids"))
        .args(args)
        .env("IDS_LOG_LEVEL", "error")
        .output()
        .expect("run ids")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, classes: usize) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    fs::write(&spec, format!(r#"{{"classes":{classes},"rows_per_class":60,"seed":4}}"#)).unwrap();
    let data = dir.join("data");
    let out = ids(&["synth", "--spec", s(&spec), "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn full_round_trip() {
    let dir = tempdir().unwrap();
    let data = synth(dir.path(), 2);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"config_version":1,"task":"binary","models":["gbm","rf"],"split":[0.8,0.2,0.0],"seed":3,
            "hyperparams":{"rf":{"n_trees":10},"gbm":{"max_rounds":20}}}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = ids(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("gbm\taccuracy="));
    assert!(run.join("manifest.json").is_file());

    let report = dir.path().join("eval.json");
    let out = ids(&["evaluate", "--model", s(&run.join("gbm")), "--data", s(&data), "--report", s(&report)]);
    assert!(out.status.success());
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(metrics["accuracy"].as_f64().unwrap() >= 0.95);

    let preds = dir.path().join("preds.csv");
    let out = ids(&["predict", "--model", s(&run.join("rf")), "--input", s(&data), "--output", s(&preds)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 121);

    let imp = dir.path().join("imp.csv");
    let out = ids(&[
        "importance", "--model", s(&run.join("gbm")), "--data", s(&data), "--repeats", "2", "--seed", "7", "--out", s(&imp),
    ]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&imp).unwrap().starts_with("feature,mean_importance,repeat_values\n"));
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let data = synth(dir.path(), 2);

    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"config_version":1,"task":"binary","models":["xgb"],"seed":1}"#).unwrap();
    let out = ids(&["train", "--config", s(&bad_cfg), "--data", s(&data), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"config_version":1,"task":"binary","models":["knn"],"seed":1}"#).unwrap();
    let missing = dir.path().join("missing");
    let out = ids(&["train", "--config", s(&cfg), "--data", s(&missing), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(3));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{}").unwrap();
    let out = ids(&["predict", "--model", s(&garbage), "--input", s(&data), "--output", s(&dir.path().join("p.csv"))]);
    assert_eq!(out.status.code(), Some(4));

    let out = ids(&["train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_cli_is_deterministic() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let da = synth(a.path(), 7);
    let db = synth(b.path(), 7);
    let file = "conn.log.labeled";
    let ta = fs::read(da.join(file)).unwrap();
    assert_eq!(ta, fs::read(db.join(file)).unwrap());
    let rows = String::from_utf8(ta).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 420);
}

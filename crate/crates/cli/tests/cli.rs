use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SYSTEM: &str = r#"{
  "kind": "arx",
  "xi": {"rows": 1, "cols": 3, "data": [0.3, -0.2, 0.5]},
  "d": {"rows": 1, "cols": 2, "data": [1.0, 0.4]},
  "lag": 1,
  "dims": {"n_u": 1, "n_ws": 1, "n_y": 1},
  "noise": {"family": "gaussian", "scale": [0.1]}
}"#;

fn stochpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochpred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, steps: usize) -> String {
    let sys = dir.join("system.json");
    fs::write(&sys, SYSTEM).unwrap();
    let data = dir.join("data.csv");
    let out = stochpred(&[
        "synth",
        "--system",
        sys.to_str().unwrap(),
        "--steps",
        &steps.to_string(),
        "--seed",
        "4",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    data.to_str().unwrap().to_string()
}

#[test]
fn synth_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 400);
    let header = fs::read_to_string(&data).unwrap();
    assert!(header.starts_with("timestamp,u1,ws1,y1\n"));
    assert_eq!(header.lines().count(), 401);

    let out_dir = dir.path().join("report");
    let out = stochpred(&[
        "run",
        "--data",
        &data,
        "--T",
        "200",
        "--N",
        "8",
        "--lag",
        "1",
        "--stride",
        "40",
        "--bounds",
        "cheb4,gauss",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["scenarios"], 5);
    assert_eq!(summary["bounds"].as_array().unwrap().len(), 2);
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
    let csv = fs::read_to_string(out_dir.join("scenarios.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,k,output,truth,mean,subspace,radius_cheb4,radius_gauss"
    );
    assert_eq!(csv.lines().count(), 1 + 5 * 8);
    assert!(out_dir.join("config.json").exists());
}

#[test]
fn config_file_with_inline_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 300);
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"T": 150, "N": 5, "lag": 1, "stride": 50, "ws_channels": []}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("r");
    let out = stochpred(&[
        "run",
        "--data",
        &data,
        "--config",
        cfg.to_str().unwrap(),
        "--gamma",
        "0.8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["gamma"], 0.8);
    assert_eq!(summary["config"]["T"], 150);
    assert_eq!(summary["config"]["ws_channels"], serde_json::json!([]));
}

#[test]
fn errors_are_machine_readable() {
    let out = stochpred(&["run", "--data", "/nonexistent/data.csv"]);
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(err["error"], "io");

    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 50);
    let out = stochpred(&[
        "run", "--data", &data, "--T", "100", "--N", "5", "--lag", "1",
    ]);
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "bounds");

    let out = stochpred(&["run", "--data", &data, "--gamma", "1.5"]);
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "domain");
}

#[test]
fn check_prints_one_line_per_criterion() {
    let out = Command::new(env!("CARGO_BIN_EXE_stochpred"))
        .arg("check")
        .env_remove("STOCHPRED_DATASET")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 9, "{text}");
    for (i, l) in lines.iter().enumerate() {
        assert!(l.starts_with(&format!("criterion {}", i + 1)), "{l}");
    }
    assert!(out.status.success(), "{text}");
}

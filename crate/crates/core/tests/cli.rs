use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pa-modelkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn carrier(seed: u64) -> Value {
    json!({"num_subcarriers": 64, "bandwidth_hz": 20e6, "oversampling": 8, "qam_order": 16, "seed": seed})
}

fn small_config(k: usize, samples: usize, models: Value) -> Value {
    let carriers: Vec<Value> = (0..k as u64).map(carrier).collect();
    json!({
        "name": "cli",
        "seed": 7,
        "signal": {"carriers": carriers, "num_samples": samples},
        "pa": serde_json::to_value(pa_modelkit::pipeline::desk_pa()).unwrap(),
        "feature": {"memory_depth": 3, "carriers": k},
        "models": models,
        "train": {"l1": 2, "l2": 1, "batch_size": 128},
    })
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_writes_one_row_per_sample() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &small_config(1, 20000, json!([{"type": "gmp"}])));
    let out = dir.path().join("out");
    let o = run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert_eq!(text.lines().count(), 20001);
    assert_eq!(text.lines().next().unwrap(), "n,I_in_1,Q_in_1,I_out_1,Q_out_1");
    assert!(out.join("dataset.json").exists());
}

#[test]
fn two_carrier_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &small_config(2, 3000, json!([{"type": "drvcnn"}])));
    let out = dir.path().join("out");
    let o = run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,I_in_1,Q_in_1,I_in_2,Q_in_2,I_out_1,Q_out_1,I_out_2,Q_out_2"
    );
}

#[test]
fn full_run_reports_every_model() {
    let dir = TempDir::new().unwrap();
    let models = json!([{"type": "drvcnn"}, {"type": "arvtdnn"}, {"type": "dnn"}, {"type": "gmp"}]);
    let cfg = write_config(dir.path(), &small_config(1, 3000, models));
    let out = dir.path().join("out");
    let o = run(&["all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "name,count,nmse_db");
    let counts: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts, ["193", "393", "801", "214"]);
    for stem in ["drvcnn", "arvtdnn", "dnn", "gmp"] {
        assert!(out.join(format!("model_{stem}.json")).exists());
        assert!(out.join(format!("spectrum_{stem}_c1.csv")).exists());
    }
    let log = std::fs::read_to_string(out.join("train_log_drvcnn.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2 + 1);
}

#[test]
fn train_then_evaluate_in_separate_steps() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &small_config(1, 2500, json!([{"type": "drvcnn"}])));
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    for step in ["generate", "train", "evaluate"] {
        let o = run(&[step, "--config", &cfg, "--out", out_s]);
        assert!(o.status.success(), "{step}: {}", stderr(&o));
    }
    let json: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["rows"][0]["coefficient_count"], 193);
}

#[test]
fn multi_carrier_gmp_is_unsupported() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &small_config(2, 2000, json!([{"type": "gmp"}])));
    let o = run(&["all", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("multi-carrier GMP unsupported"), "{}", stderr(&o));
}

#[test]
fn evaluate_without_models_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &small_config(1, 2000, json!([{"type": "drvcnn"}])));
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert!(run(&["generate", "--config", &cfg, "--out", out_s]).status.success());
    let o = run(&["evaluate", "--config", &cfg, "--out", out_s]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_input_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["preset", "quadruple"]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        run(&["generate", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let mut cfg = small_config(1, 2000, json!([{"type": "drvcnn"}]));
    cfg["feature"]["carriers"] = json!(2);
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["generate", "--config", &path]).status.code(), Some(1));
}

#[test]
fn presets_parse_back() {
    for name in ["single", "dual", "triple", "triple28"] {
        let o = run(&["preset", name]);
        assert!(o.status.success());
        let cfg = pa_modelkit::pipeline::ExperimentConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
        cfg.validate().unwrap();
    }
}

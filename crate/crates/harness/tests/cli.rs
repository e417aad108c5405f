//! End-to-end checks of the `cpe` binary: file formats round-trip, outputs
//! are byte-identical across `--jobs` levels, replay works, and exit codes
//! distinguish configuration problems from runtime failures.

use std::path::PathBuf;
use std::process::Command;

use cpe_harness::model_json::{instance_from_json, instance_to_json, load_instance};
use cpe_harness::runner::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpe"))
}

fn tmp_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cpe-cli-{label}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_predict_run_replay_round_trip() {
    let dir = tmp_dir("flow");
    let inst_path = dir.join("instance.json");

    // gen
    let status = bin()
        .args([
            "gen",
            "--kind",
            "experiment3",
            "--params",
            r#"{"n": 3}"#,
            "--seed",
            "3",
            "--out",
            inst_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // instance JSON round-trips structurally
    let inst = load_instance(inst_path.to_str().unwrap()).unwrap();
    let json = instance_to_json(&inst);
    let back = instance_from_json(&json).unwrap();
    assert_eq!(inst.model, back.model);
    assert_eq!(inst.actions, back.actions);
    assert_eq!(inst.sequences, back.sequences);

    // predict
    let out = bin()
        .args([
            "predict",
            "--instance",
            inst_path.to_str().unwrap(),
            "--epsilon",
            "0.1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n_actions"], serde_json::json!(inst.actions.len()));
    assert!(report["observation_threshold"].as_u64().unwrap() >= 1);

    // run from a config referencing the generated file, two jobs levels
    let cfg_path = dir.join("config.json");
    let cfg = serde_json::json!({
        "instance": {"file": inst_path.to_str().unwrap()},
        "algorithms": [
            {"name": "ccpe_general", "epsilon": 0.1, "delta": 0.1, "alpha_o": 0.3, "alpha_i": 0.4}
        ],
        "trials": 10,
        "master_seed": 4,
        "mode": {"kind": "budget_censored", "budgets": [90, 180]}
    });
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out1 = dir.join("run1");
    let out4 = dir.join("run4");
    for (out_dir, jobs) in [(&out1, "1"), (&out4, "4")] {
        let status = bin()
            .args([
                "run",
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--jobs",
                jobs,
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv1 = std::fs::read(out1.join("aggregate.csv")).unwrap();
    let csv4 = std::fs::read(out4.join("aggregate.csv")).unwrap();
    assert_eq!(csv1, csv4, "CSV differs across --jobs");
    let jsonl1 = std::fs::read(out1.join("trials.jsonl")).unwrap();
    let jsonl4 = std::fs::read(out4.join("trials.jsonl")).unwrap();
    assert_eq!(jsonl1, jsonl4, "JSONL differs across --jobs");
    let csv_text = String::from_utf8(csv1).unwrap();
    assert!(csv_text.starts_with(CSV_HEADER), "stable CSV schema");

    // replay trial 2 and find it verbatim in the JSONL
    let out = bin()
        .args([
            "replay",
            "--config",
            cfg_path.to_str().unwrap(),
            "--algo",
            "0",
            "--param",
            "90",
            "--trial",
            "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let replayed = String::from_utf8(out.stdout).unwrap();
    let jsonl_text = String::from_utf8(jsonl1).unwrap();
    assert!(
        jsonl_text.lines().any(|line| line == replayed.trim_end()),
        "replayed record not found in trials.jsonl"
    );

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tune_emits_table_and_best_cell() {
    let dir = tmp_dir("tune");
    let cfg_path = dir.join("config.json");
    let cfg = serde_json::json!({
        "instance": {"kind": "parallel", "params": {"n": 2}, "seed": 1},
        "algorithms": [
            {"name": "ccpe_general", "epsilon": 0.1, "delta": 0.1}
        ],
        "trials": 5,
        "master_seed": 9,
        "mode": {"kind": "budget_censored", "budgets": [80]},
        "grid": {"alpha_o": [0.5], "alpha_i": [0.5], "pilot_trials": 5}
    });
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = bin()
        .args([
            "tune",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    // single-cell grid returns that cell
    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("best.json")).unwrap()).unwrap();
    assert_eq!(best["alpha_o"], serde_json::json!(0.5));
    assert_eq!(best["alpha_i"], serde_json::json!(0.5));
    let table = std::fs::read_to_string(dir.join("tune.csv")).unwrap();
    assert!(table.starts_with("alpha_o,alpha_i,error_prob,mean_rounds"));
    assert_eq!(table.lines().count(), 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_distinguish_config_errors() {
    // unknown instance kind -> exit 2
    let out = bin()
        .args([
            "gen",
            "--kind",
            "nonsense",
            "--out",
            "/tmp/never-written.json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // malformed config file -> exit 2
    let dir = tmp_dir("exit");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = bin()
        .args([
            "run",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // clap usage error -> exit 2 as well
    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

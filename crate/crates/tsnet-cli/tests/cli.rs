//! End-to-end tests of the `tsnet` binary: exit codes, file outputs,
//! and reproducibility of the generate/train/evaluate/solve flow.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn tsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_tiny_config(path: &Path) {
    // Small everything: N = 6 instances, light GA, narrow network.
    let config = r#"{
        "params": {"n_bar": 8},
        "distribution": {
            "u_range": [1e5, 1e6],
            "c_range": [1e8, 2e9],
            "d_range": [1e5, 2e8],
            "h_log10_range": [-10.0, -7.0],
            "n_values": [6],
            "seed": 0
        },
        "ga": {
            "population_size": 12,
            "generations": 10,
            "tournament_size": 3,
            "crossover_rate": 0.9,
            "mutation_rate": null,
            "elitism_count": 2,
            "seed": 0
        },
        "net": {
            "embed_dim": 8,
            "encoder_layers": 1,
            "head_count": 2,
            "ffn_dim": 8,
            "dropout": 0.0,
            "seed": 1,
            "positional_encoding": false
        },
        "extender": {"n_bar": 8, "pad_value": -1.0, "pad_mode": "outlier"},
        "sac": {"k": 4, "sigma": 0.3},
        "train": {"epochs": 2, "learning_rate": 1e-3, "val_fraction": 0.25, "split_seed": 0},
        "count_per_n": 10,
        "seed": 0
    }"#;
    fs::write(path, config).unwrap();
}

#[test]
fn generate_writes_requested_line_count() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let data = dir.path().join("data");
    let out = tsnet(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(data.join("data.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(data.join("manifest.json").exists());
}

#[test]
fn generate_rerun_is_byte_identical() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let d1 = dir.path().join("d1");
    let d2 = dir.path().join("d2");
    for d in [&d1, &d2] {
        let out = tsnet(&[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(d1.join("data.jsonl")).unwrap(),
        fs::read(d2.join("data.jsonl")).unwrap()
    );
}

#[test]
fn oversized_n_value_exits_2_with_named_error() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let text = fs::read_to_string(&cfg).unwrap().replace("[6]", "[41]");
    fs::write(&cfg, text).unwrap();
    let out = tsnet(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n_bar"), "stderr: {err}");
}

#[test]
fn missing_config_exits_3() {
    let out = tsnet(&[
        "generate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        "/tmp/unused-tsnet-out",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_pipeline_train_evaluate_solve() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let data = dir.path().join("data");
    assert!(tsnet(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ])
    .status
    .success());

    let off = dir.path().join("offload.json");
    let res = dir.path().join("resource.json");
    for (net, path) in [("offload", &off), ("resource", &res)] {
        let out = tsnet(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--net",
            net,
            "--data",
            data.to_str().unwrap(),
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(path.exists());
        assert!(path.with_extension("curve.csv").exists());
    }

    let report = dir.path().join("report.csv");
    let out = tsnet(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--ckpts",
        off.to_str().unwrap(),
        res.to_str().unwrap(),
        "--methods",
        "all-local,ga,tsnet,tsnet-sac",
        "--out",
        report.to_str().unwrap(),
        "--sweep-k",
        "1,2,4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(dir.path().join("utility_vs_n.txt").exists());
    assert!(dir.path().join("accuracy_vs_n.txt").exists());
    assert!(dir.path().join("sac_gain_vs_k.txt").exists());
    assert!(dir.path().join("threshold_sweep.txt").exists());

    // Solve one instance with both a search method and the pipeline.
    let inst = dir.path().join("inst.json");
    fs::write(&inst, r#"{"tasks": [[2e5, 5e8, 1e6, 1e-8]]}"#).unwrap();
    for method in ["ga", "tsnet-sac"] {
        let mut args = vec![
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--instance",
            inst.to_str().unwrap(),
            "--method",
            method,
        ];
        if method != "ga" {
            args.extend(["--ckpts", off.to_str().unwrap(), res.to_str().unwrap()]);
        }
        let out = tsnet(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let doc: serde_json::Value =
            serde_json::from_slice(&out.stdout).expect("stdout is JSON");
        assert_eq!(doc["schedule"]["offload"].as_array().unwrap().len(), 1);
        assert_eq!(doc["report"]["feasible"], serde_json::Value::Bool(true));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("latency_ms"), "stderr: {err}");
    }
}

#[test]
fn unknown_method_exits_2_listing_valid_methods() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let inst = dir.path().join("inst.json");
    fs::write(&inst, r#"{"tasks": [[2e5, 5e8, 1e6, 1e-8]]}"#).unwrap();
    let out = tsnet(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--instance",
        inst.to_str().unwrap(),
        "--method",
        "simulated-annealing",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tsnet-sac") && err.contains("all-local"), "stderr: {err}");
}

#[test]
fn evaluate_all_local_needs_no_checkpoints() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let data = dir.path().join("data");
    assert!(tsnet(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ])
    .status
    .success());
    let report = dir.path().join("report.csv");
    let out = tsnet(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "all-local",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.exists());
}

#[test]
fn evaluate_with_missing_checkpoint_exits_2() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    write_tiny_config(&cfg);
    let data = dir.path().join("data");
    assert!(tsnet(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ])
    .status
    .success());
    let out = tsnet(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "tsnet",
        "--out",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

//! End-to-end subcommand tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn dasgil() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dasgil"))
}

fn tiny_world_json(seed: u64) -> String {
    serde_json::json!({
        "image_height": 32,
        "image_width": 32,
        "sequences": 1,
        "frames_per_sequence": 8,
        "environments": [
            {"name": "clone", "appearance": {"gain": [1.0, 1.0, 1.0], "hue_deg": 0.0, "noise_std": 0.005}},
            {"name": "fog", "appearance": {"gain": [0.7, 0.7, 0.75], "hue_deg": 0.0, "noise_std": 0.02}}
        ],
        "real_domain_shift": {"gain": [0.8, 1.0, 1.25], "hue_deg": -35.0, "noise_std": 0.05},
        "class_count": 4,
        "seed": seed
    })
    .to_string()
}

fn tiny_run_json(manifest: &Path) -> String {
    serde_json::json!({
        "net": {
            "input_height": 32, "input_width": 32, "input_channels": 3,
            "encoder_layers": 3, "channels_per_layer": [4, 8, 16],
            "class_count": 4, "depth_output_layers": [1, 2],
            "triplet_layers": [2, 3], "retrieval_layers": [3],
            "discriminator_kind": "flatten", "discriminator_layers": [1, 2, 3],
            "fd_hidden": [16, 16], "cd_final_dim": 1536
        },
        "train": {
            "batch_size": 2, "learning_rate": 0.002, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
            "epochs": 1,
            "weights": {"lambda_t": 1.0, "lambda_d": 0.05, "lambda_s": 0.5,
                        "margins": {"2": 1.0, "3": 1.0}},
            "seed": 11, "checkpoint_every": 0, "adversarial": true, "random_crop": false
        },
        "data": {"manifest": manifest.to_str().unwrap()},
        "retrieval": {"metric": "l1"},
        "eval": {"recall_ns": [1, 2], "radius_m": 2.1, "top1_thresholds_m": [1.0, 2.0, 4.0], "k": 3}
    })
    .to_string()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Workspace { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Generate the tiny dataset and write the run config pointing at it.
    fn with_dataset(self) -> Self {
        std::fs::write(self.path("toy.json"), tiny_world_json(5)).unwrap();
        let status = dasgil()
            .args([
                "toygen",
                "--config",
                self.path("toy.json").to_str().unwrap(),
                "--out",
                self.path("data").to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::write(
            self.path("run.json"),
            tiny_run_json(&self.path("data/manifest.jsonl")),
        )
        .unwrap();
        self
    }
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_str().unwrap().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn help_exits_zero() {
    let out = dasgil().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_two() {
    let out = dasgil().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toygen_is_byte_identical_across_runs() {
    let ws = Workspace::new();
    std::fs::write(ws.path("toy.json"), tiny_world_json(9)).unwrap();
    for out in ["a", "b"] {
        let status = dasgil()
            .args([
                "toygen",
                "--config",
                ws.path("toy.json").to_str().unwrap(),
                "--out",
                ws.path(out).to_str().unwrap(),
                "--seed",
                "7",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(tree_bytes(&ws.path("a")), tree_bytes(&ws.path("b")));
}

#[test]
fn invalid_config_rejected_before_any_write() {
    let ws = Workspace::new().with_dataset();
    let out_dir = ws.path("runs");
    let out = dasgil()
        .args([
            "train",
            "--config",
            ws.path("run.json").to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--set",
            "net.encoder_layers=9",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists(), "no files may be written on rejection");
}

#[test]
fn full_pipeline_train_build_query_eval_viz() {
    let ws = Workspace::new().with_dataset();
    let run = ws.path("run.json");
    let status = dasgil()
        .args([
            "train",
            "--config",
            run.to_str().unwrap(),
            "--out",
            ws.path("run1").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let ckpt = ws.path("run1/checkpoint.dgck");
    assert!(ckpt.exists());
    assert!(ws.path("run1/trainlog.jsonl").exists());

    let status = dasgil()
        .args([
            "build-db",
            "--config",
            run.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            ws.path("db.dgfd").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // query one real image against the database
    let out = dasgil()
        .args([
            "query",
            "--db",
            ws.path("db.dgfd").to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--image",
            ws.path("data/images/r_s00_f003.png").to_str().unwrap(),
            "--metric",
            "l1",
            "--k",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 3, "top-3 requested:\n{stdout}");
    assert!(!String::from_utf8_lossy(&out.stderr).contains("digest mismatch"));

    let status = dasgil()
        .args([
            "eval",
            "--config",
            run.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--db",
            ws.path("db.dgfd").to_str().unwrap(),
            "--out",
            ws.path("report.json").to_str().unwrap(),
            "--plots",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(ws.path("report.json").exists());
    assert!(ws.path("report_recall_at_n.png").exists());
    assert!(ws.path("report_top1_recall_at_d.png").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(ws.path("report.json")).unwrap()).unwrap();
    assert!(report["buckets"]["coarse"].as_f64().unwrap() >= 0.0);
    assert!(report["meta"]["checkpoint_digest"].as_str().unwrap().len() == 64);

    let status = dasgil()
        .args([
            "viz",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--image",
            ws.path("data/images/v_s00_f000_clone.png").to_str().unwrap(),
            "--out",
            ws.path("strips").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let strips: Vec<_> = std::fs::read_dir(ws.path("strips"))
        .unwrap()
        .filter_map(|e| e.ok())
        .collect();
    assert_eq!(strips.len(), 1);
}

#[test]
fn query_warns_on_digest_mismatch() {
    let ws = Workspace::new().with_dataset();
    let run = ws.path("run.json");
    for (out, seed) in [("runA", "21"), ("runB", "22")] {
        let status = dasgil()
            .args([
                "train",
                "--config",
                run.to_str().unwrap(),
                "--out",
                ws.path(out).to_str().unwrap(),
                "--seed",
                seed,
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let status = dasgil()
        .args([
            "build-db",
            "--config",
            run.to_str().unwrap(),
            "--checkpoint",
            ws.path("runA/checkpoint.dgck").to_str().unwrap(),
            "--out",
            ws.path("db.dgfd").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let out = dasgil()
        .args([
            "query",
            "--db",
            ws.path("db.dgfd").to_str().unwrap(),
            "--checkpoint",
            ws.path("runB/checkpoint.dgck").to_str().unwrap(),
            "--image",
            ws.path("data/images/r_s00_f000.png").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("digest mismatch"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn ablate_variant_flags_toggle_named_losses() {
    let ws = Workspace::new().with_dataset();
    let status = dasgil()
        .args([
            "ablate",
            "--config",
            ws.path("run.json").to_str().unwrap(),
            "--out",
            ws.path("ablation").to_str().unwrap(),
            "--variant",
            "no-gan",
            "--variant",
            "multi-fd",
            "--variant",
            "depth-only",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let read_report = |name: &str| -> serde_json::Value {
        serde_json::from_slice(
            &std::fs::read(ws.path(&format!("ablation/{name}/report.json"))).unwrap(),
        )
        .unwrap()
    };
    let no_gan = read_report("no-gan");
    let multi_fd = read_report("multi-fd");
    assert_eq!(
        no_gan["meta"]["dataset_digest"], multi_fd["meta"]["dataset_digest"],
        "shared dataset digest"
    );
    // the toggled loss columns are exactly zero in the step logs
    let logs = |name: &str| -> Vec<serde_json::Value> {
        std::fs::read_to_string(ws.path(&format!("ablation/{name}/trainlog.jsonl")))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    for log in logs("no-gan") {
        assert_eq!(log["L_dis"].as_f64().unwrap(), 0.0);
        assert_eq!(log["L_gen"].as_f64().unwrap(), 0.0);
    }
    for log in logs("depth-only") {
        assert_eq!(log["L_S"].as_f64().unwrap(), 0.0);
        assert!(log["L_dis"].as_f64().unwrap() != 0.0);
    }
    for log in logs("multi-fd") {
        assert!(log["L_S"].as_f64().unwrap() != 0.0);
    }
    assert!(ws.path("ablation/summary.md").exists());
    assert!(ws.path("ablation/summary.json").exists());
}

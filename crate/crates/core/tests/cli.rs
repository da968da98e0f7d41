use std::path::Path;
use std::process::{Command, Output};

use protoseg::embedder::{EmbedderConfig, EmbedderParams};

fn protoseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protoseg"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = protoseg(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL_DATA: &str = r#"{
  "synthetic": {"height": 16, "width": 16, "images_seen": 40, "images_unseen": 24},
  "embedder": {"hidden": 6, "dim": 8},
  "train": {"iterations": 10},
  "eval": {"runs": 2, "episodes": 6}
}"#;

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), SMALL_DATA).unwrap();
    ok(dir.path(), &["gen-data", "--config", "run.json"]);
    dir
}

#[test]
fn gen_data_defaults_and_seed_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &["gen-data", "--seed", "3", "--dataset", "a"]);
    let b = ok(dir.path(), &["gen-data", "--seed", "3", "--dataset", "b"]);
    assert!(dir.path().join("a/manifest.json").exists());
    let hash = |s: &str| s.lines().find(|l| l.starts_with("sha256")).unwrap().to_string();
    assert_eq!(hash(&a), hash(&b));
}

#[test]
fn unwritable_dataset_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), b"").unwrap();
    let out = protoseg(dir.path(), &["gen-data", "--dataset", "blocker/data"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("i/o error"));
}

#[test]
fn missing_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = protoseg(dir.path(), &["train", "--dataset", "nowhere"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_errors_exit_2() {
    let dir = workspace();
    let out = protoseg(
        dir.path(),
        &["train", "--config", "run.json", "--variant", "f-srp", "--w-s", "0"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = protoseg(dir.path(), &["train", "--config", "run.json", "--lr", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), r#"{"nonsense": true}"#).unwrap();
    let out = protoseg(dir.path(), &["train", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_iterations_checkpoint_is_init() {
    let dir = workspace();
    ok(
        dir.path(),
        &["train", "--config", "run.json", "--variant", "f", "--iterations", "0", "--seed", "5"],
    );
    let saved = EmbedderParams::load(dir.path().join("checkpoints/f.pseg")).unwrap();
    let cfg = EmbedderConfig {
        hidden: 6,
        dim: 8,
        ..EmbedderConfig::default()
    };
    assert_eq!(saved, EmbedderParams::init(&cfg, 5).unwrap());
}

#[test]
fn train_twice_same_bytes() {
    let dir = workspace();
    let args = ["train", "--config", "run.json", "--variant", "f-srp"];
    ok(dir.path(), &args);
    let first = std::fs::read(dir.path().join("checkpoints/f-srp.pseg")).unwrap();
    ok(dir.path(), &args);
    let second = std::fs::read(dir.path().join("checkpoints/f-srp.pseg")).unwrap();
    assert_eq!(first, second);
    let log = std::fs::read_to_string(dir.path().join("checkpoints/f-srp.train.csv")).unwrap();
    assert_eq!(log.lines().count(), 11);
}

#[test]
fn single_prototype_iqi_matches_plain_fidelity() {
    let dir = workspace();
    ok(dir.path(), &["train", "--config", "run.json", "--variant", "f"]);
    let eval = |variant: &str, reports: &str| {
        ok(
            dir.path(),
            &[
                "eval", "--config", "run.json", "--variant", variant, "--num-prototypes", "1",
                "--checkpoint", "checkpoints/f.pseg", "--reports", reports,
            ],
        );
        let text = std::fs::read_to_string(dir.path().join(reports).join("run.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["variants"][0]["variant"] = serde_json::Value::Null;
        v
    };
    assert_eq!(eval("f", "rf"), eval("f-iqi", "ri"));
}

#[test]
fn dump_masks_and_repeatable_reports() {
    let dir = workspace();
    ok(dir.path(), &["train", "--config", "run.json", "--variant", "f"]);
    let args = [
        "eval", "--config", "run.json", "--variant", "f", "--episodes", "1", "--runs", "1",
        "--dump-masks",
    ];
    ok(dir.path(), &args);
    let first = std::fs::read(dir.path().join("reports/run.json")).unwrap();
    assert!(dir.path().join("masks/f_r0_e0000_q0_pred.pseg").exists());
    assert!(dir.path().join("masks/f_r0_e0000_q0_gt.pseg").exists());
    ok(dir.path(), &args);
    assert_eq!(first, std::fs::read(dir.path().join("reports/run.json")).unwrap());
    let csv = std::fs::read_to_string(dir.path().join("reports/run.csv")).unwrap();
    assert!(csv.starts_with("variant,metric,mean,std,runs"));
}

#[test]
fn episode_command_prints_metrics() {
    let dir = workspace();
    ok(dir.path(), &["train", "--config", "run.json", "--variant", "f-srp"]);
    let out = ok(
        dir.path(),
        &["episode", "--config", "run.json", "--variant", "f-srp-iqi", "--episode-seed", "4"],
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rhos"].as_array().unwrap().len(), 5);
    assert_eq!(v["variant"], "f-srp-iqi");
}

#[test]
fn ablate_table_has_seven_rows() {
    let dir = workspace();
    let out = ok(dir.path(), &["ablate", "--config", "run.json"]);
    let table = std::fs::read_to_string(dir.path().join("reports/ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    let labels: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(
        labels,
        ["Cos", "F", "F+SRP", "F+IQI", "F+SRP+IQI", "F (sup)", "F+SRP (sup)"]
    );
    assert!(out.contains("F+SRP (sup)"));
}

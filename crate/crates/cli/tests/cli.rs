use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use faceparse::faceseg::{CLASS_COUNT, PALETTE};
use faceparse::netkit::toy_network;
use faceparse::profile::Profile;

const PROFILE: &str = "small.toml";

fn faceparse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faceparse"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = faceparse(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = faceparse(dir, args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn small_profile() -> String {
    let mut p = Profile::toy_defaults();
    p.name = "small".into();
    p.segmentation.train.epochs = 2;
    p.attribute.feature_size = [8, 8];
    p.attribute.network = toy_network([5, 8, 8], 2);
    p.attribute.train.epochs = 5;
    p.forest.trees = 20;
    p.to_toml().unwrap()
}

/// Temp directory holding `small.toml` and an 8-face synthetic dataset in `data/`.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(PROFILE), small_profile()).unwrap();
    ok(dir.path(), &["synth", "--n", "8", "--seed", "3", "--profile", PROFILE, "--out", "data"]);
    dir
}

fn train_seg(dir: &Path, out: &str) {
    ok(dir, &["train-seg", "--data", "data", "--profile", PROFILE, "--out", out, "--seed", "5"]);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["--help"]).0, 0);
    assert_eq!(code(dir.path(), &["--version"]).0, 0);
    assert_eq!(code(dir.path(), &["kfold", "--help"]).0, 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (status, stderr) = code(dir.path(), &["train-seg"]);
    assert_eq!(status, 1);
    assert!(stderr.contains("--data") && stderr.contains("Usage"), "{stderr}");
    assert_eq!(code(dir.path(), &["synth", "--n", "2", "--bogus"]).0, 1);
    assert_eq!(code(dir.path(), &["frobnicate"]).0, 1);
    let (status, stderr) = code(dir.path(), &["synth", "--n", "2", "--profile", "nonesuch"]);
    assert_eq!(status, 1);
    assert!(stderr.contains("nonesuch"), "{stderr}");
    assert_eq!(code(dir.path(), &["classify", "--model", "m.fpkt", "--image", "x.png"]).0, 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["train-seg", "--data", "missing"]).0, 2);
    fs::write(dir.path().join("bad.fpkt"), b"not a checkpoint").unwrap();
    fs::write(dir.path().join("x.png"), b"not a png").unwrap();
    let (status, stderr) = code(dir.path(), &["segment", "--model", "bad.fpkt", "--image", "x.png"]);
    assert_eq!(status, 2);
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn full_pipeline() {
    let ws = workspace();
    let dir = ws.path();
    assert!(dir.join("data/manifest.json").exists());
    assert!(dir.join("data/run_record.json").exists());

    train_seg(dir, "seg");
    assert!(dir.join("seg/seg.fpkt").exists());

    ok(dir, &["segment", "--model", "seg/seg.fpkt", "--image", "data/images/face_0000.png", "--profile", PROFILE, "--out", "pms"]);
    for entry in PALETTE.iter() {
        assert!(dir.join(format!("pms/pm_{}.png", entry.name)).exists(), "{}", entry.name);
    }
    assert!(dir.join("pms/pms.fppm").exists());
    let maps = fs::read_dir(dir.join("pms"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("pm_"))
        .count();
    assert_eq!(maps, CLASS_COUNT);

    ok(dir, &["segment", "--model", "seg/seg.fpkt", "--data", "data", "--profile", PROFILE, "--out", "all"]);
    assert!(dir.join("all/face_0007/pms.fppm").exists());

    ok(dir, &["train-attr", "--data", "data", "--seg-model", "seg/seg.fpkt", "--profile", PROFILE, "--out", "attr"]);
    let label = ok(dir, &["classify", "--model", "attr/attr.fpkt", "--pms", "pms", "--profile", PROFILE, "--out", "cls"]);
    assert!(["wide_eyes", "wide_mouth"].contains(&label.trim()), "{label}");
    let body: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("cls/classification.json")).unwrap()).unwrap();
    let probs = body["probabilities"].as_array().unwrap();
    assert_eq!(probs.len(), 2);
    let total: f64 = probs.iter().map(|p| p["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let direct = ok(
        dir,
        &[
            "classify", "--model", "attr/attr.fpkt", "--image", "data/images/face_0000.png", "--seg-model", "seg/seg.fpkt",
            "--profile", PROFILE, "--out", "cls2",
        ],
    );
    assert_eq!(direct, label);

    ok(dir, &["importance", "--data", "data", "--seg-model", "seg/seg.fpkt", "--profile", PROFILE, "--out", "imp"]);
    let imp: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("imp/importance.json")).unwrap()).unwrap();
    assert_eq!(imp["ranking"].as_array().unwrap().len(), CLASS_COUNT);
    assert!(dir.join("imp/importance.png").exists());

    let wrong = code(dir, &["segment", "--model", "attr/attr.fpkt", "--image", "data/images/face_0000.png", "--profile", PROFILE, "--out", "x"]);
    assert_eq!(wrong.0, 2, "{}", wrong.1);
}

#[test]
fn kfold_writes_a_report() {
    let ws = workspace();
    let dir = ws.path();
    let stdout = ok(dir, &["kfold", "--data", "data", "--k", "2", "--permutation-control", "--profile", PROFILE, "--out", "report"]);
    assert!(stdout.contains("attribute accuracy"));
    for f in ["metrics.json", "confusion.png", "importance.png", "run_record.json"] {
        assert!(dir.join("report").join(f).exists(), "{f}");
    }
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("report/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["classification"]["folds"].as_array().unwrap().len(), 2);
    assert!(metrics["permutation_control"]["accuracy"].is_number());
    assert_eq!(metrics["fold_logs"].as_array().unwrap().len(), 2);
}

#[test]
fn run_record_lists_seeds_inputs_and_outputs() {
    let ws = workspace();
    let dir = ws.path();
    train_seg(dir, "seg");
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("seg/run_record.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 5);
    assert_eq!(record["invocation"]["command"], "train-seg");
    assert_eq!(record["profile"]["name"], "small");
    assert_eq!(record["seeds"]["train"], 5);
    let inputs = record["inputs"].as_array().unwrap();
    assert!(inputs.iter().any(|i| i["path"] == "small.toml"));
    assert!(inputs.iter().any(|i| i["path"] == "data/manifest.json"));
    assert_eq!(inputs.len(), 2 + 2 * 8);
    assert_eq!(record["outputs"][0]["path"], "seg.fpkt");
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let a = workspace();
    let b = workspace();
    for ws in [&a, &b] {
        train_seg(ws.path(), "seg");
        ok(ws.path(), &["segment", "--model", "seg/seg.fpkt", "--image", "data/images/face_0001.png", "--profile", PROFILE, "--out", "pms"]);
        ok(ws.path(), &["kfold", "--data", "data", "--k", "2", "--profile", PROFILE, "--out", "report"]);
    }
    for file in [
        "data/manifest.json",
        "data/run_record.json",
        "seg/seg.fpkt",
        "seg/run_record.json",
        "pms/pms.fppm",
        "pms/pm_mouth.png",
        "pms/run_record.json",
        "report/metrics.json",
        "report/confusion.png",
        "report/importance.png",
        "report/run_record.json",
    ] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let c = workspace();
    ok(c.path(), &["train-seg", "--data", "data", "--profile", PROFILE, "--out", "seg", "--seed", "6"]);
    assert_ne!(fs::read(a.path().join("seg/seg.fpkt")).unwrap(), fs::read(c.path().join("seg/seg.fpkt")).unwrap());
}

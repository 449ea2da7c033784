use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use labrisk::config::StudyConfig;
use labrisk::interpret::CAUSALITY_NOTICE;

fn labrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labrisk")).args(args).env("LABRISK_WORKERS", "2").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic cohort plus a study config trimmed to run in seconds.
fn quick_study(dir: &Path, seed: &str, families: &str) {
    let o = labrisk(&["synth", "--out", p(dir), "--seed", seed, "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg_path = dir.join("study.toml");
    let mut cfg = StudyConfig::parse(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg.protocol.n_iter = 2;
    cfg.protocol.families = families.split(',').map(|f| f.parse().unwrap()).collect();
    cfg.metrics.bootstrap_iterations = 50;
    fs::write(&cfg_path, cfg.to_toml()).unwrap();
}

#[test]
fn synth_defaults_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&labrisk(&["synth", "--out", p(&a)])), 0);
    assert_eq!(code(&labrisk(&["synth", "--out", p(&b)])), 0);
    for f in ["cohort.csv", "manifest.json", "study.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("cohort.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn bad_arguments_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(code(&labrisk(&["synth", "--out", p(&out), "--seed", "seven"])), 2);
    assert!(!out.exists());

    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, "n = \"many\"\n").unwrap();
    let o = labrisk(&["synth", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert!(!out.exists());

    let study = dir.path().join("study.toml");
    fs::write(&study, "[protocol]\nfolds = 1\n").unwrap();
    assert_eq!(code(&labrisk(&["train", "--config", p(&study), "--input", p(&cfg)])), 2);
}

#[test]
fn ingest_round_trip_and_missing_label() {
    let dir = tempfile::tempdir().unwrap();
    quick_study(dir.path(), "3", "logreg");
    let cfg = dir.path().join("study.toml");
    let clean = dir.path().join("clean");
    assert_eq!(code(&labrisk(&["ingest", "--config", p(&cfg), "--out", p(&clean)])), 0);
    for f in ["cohort.csv", "schema.json", "exclusions.json", "descriptive.csv"] {
        assert!(clean.join(f).exists(), "{f}");
    }
    let again = dir.path().join("again");
    assert_eq!(code(&labrisk(&["ingest", "--config", p(&cfg), "--out", p(&again)])), 0);
    assert_eq!(fs::read(clean.join("cohort.csv")).unwrap(), fs::read(again.join("cohort.csv")).unwrap());

    let text = fs::read_to_string(&cfg).unwrap().replace("label_column = \"Group\"", "label_column = \"Outcome\"");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let o = labrisk(&["ingest", "--config", p(&bad), "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Outcome"));
}

#[test]
fn train_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    quick_study(dir.path(), "4", "logreg,extra_trees");
    let cfg = dir.path().join("study.toml");
    let csv = dir.path().join("cohort.csv");
    let bundle = dir.path().join("bundle");
    assert_eq!(code(&labrisk(&["train", "--config", p(&cfg), "--quiet"])), 0);
    let again = dir.path().join("again");
    assert_eq!(code(&labrisk(&["train", "--config", p(&cfg), "--out", p(&again), "--workers", "1"])), 0);
    for f in ["metrics.json", "model.json", "split.json", "report.md", "features.json"] {
        assert_eq!(fs::read(bundle.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let o = labrisk(&["evaluate", "--bundle", p(&bundle), "--input", p(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(bundle.join("metrics.json")).unwrap(), fs::read(bundle.join("reevaluation/metrics.json")).unwrap());

    let report = dir.path().join("report.md");
    assert_eq!(code(&labrisk(&["report", "--bundle", p(&bundle), "--out", p(&report)])), 0);
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text, fs::read_to_string(bundle.join("report.md")).unwrap());
    for needle in ["Held-out performance", "Leading predictors", "CI", CAUSALITY_NOTICE] {
        assert!(text.contains(needle), "missing {needle:?}");
    }

    let split = bundle.join("split.json");
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&split).unwrap()).unwrap();
    json["test_rows"][0] = json["train_rows"][0].clone();
    let edited = serde_json::to_string(&json).unwrap();
    fs::write(&split, edited).unwrap();
    let o = labrisk(&["evaluate", "--bundle", p(&bundle), "--input", p(&csv)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn kernel_model_report_notes_missing_importance() {
    let dir = tempfile::tempdir().unwrap();
    quick_study(dir.path(), "5", "svm_rbf");
    let cfg = dir.path().join("study.toml");
    assert_eq!(code(&labrisk(&["train", "--config", p(&cfg), "--quiet"])), 0);
    let text = fs::read_to_string(dir.path().join("bundle/report.md")).unwrap();
    assert!(text.contains("importance"), "{text}");
    assert!(text.contains(CAUSALITY_NOTICE));
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&labrisk(&["--help"])), 0);
    assert_eq!(code(&labrisk(&["frobnicate"])), 2);
}

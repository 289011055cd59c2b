use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_mmsa");

fn mmsa(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("MMSA_WORKERS", "1").output().unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, cells: &str) -> PathBuf {
    let cells: Vec<String> = cells
        .split(',')
        .map(|c| {
            let (k, t) = c.split_once(':').unwrap();
            format!(r#"{{"kind": "{k}", "tasks": "{t}"}}"#)
        })
        .collect();
    let text = format!(
        r#"{{
  "dataset": {{"synthetic": {{"config": {{"n_segments": 30, "max_words": 3}}, "seed": 4}}}},
  "split": {{"sizes": {{"train": 18, "validation": 6}}}},
  "cells": [{}],
  "train": {{"max_epochs": 4}},
  "output_dir": "{}",
  "plots": false
}}"#,
        cells.join(", "),
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn generate_reproduces_fixture_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("twelve.jsonl");
    let cfg = fixtures().join("twelve.config.json");
    let o = mmsa(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixtures().join("twelve.jsonl")).unwrap());
}

#[test]
fn fixture_gold_scores() {
    let records = mmsa::data::load_dataset(&fixtures().join("twelve.jsonl")).unwrap();
    let golds: Vec<f64> = records.iter().map(|r| r.gold_score).collect();
    assert_eq!(
        golds,
        [-0.9985, 0.4966, 2.3353, 2.6168, 1.1291, 2.2097, 0.5902, 2.0247, 1.7054, 2.5036, 2.732, -1.0851]
    );
}

#[test]
fn align_writes_one_row_per_word() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aligned.jsonl");
    let input = fixtures().join("twelve.jsonl");
    let o = mmsa(&["align", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let aligned: Vec<mmsa::data::AlignedSegment> =
        mmsa::container::read_file(&out, mmsa::data::ALIGNED_KIND).unwrap();
    let records = mmsa::data::load_dataset(&input).unwrap();
    assert_eq!(aligned.len(), 12);
    for (a, r) in aligned.iter().zip(&records) {
        assert_eq!(a.len(), r.words.len());
        assert_eq!(a.vocal.len(), a.len());
        assert_eq!(a.labels.score, r.gold_score);
    }
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"train": {"learning_rate": -1.0}}"#).unwrap();
    let o = mmsa(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    fs::write(&path, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(mmsa(&["run", "--config", path.to_str().unwrap()]).status.code(), Some(2));

    let o = mmsa(&["run", "--cells", "GRU:S"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GRU"));

    assert_eq!(mmsa(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mmsa(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_report_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "vocal:S,verbal:S+P");
    let o = mmsa(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let root = dir.path().join("out");
    for f in ["config.json", "results.jsonl", "significance.jsonl", "table.jsonl", "table.txt", "cells.jsonl"] {
        assert!(root.join(f).exists(), "{f}");
    }
    let cell = root.join("cells/verbal_S+P_seed0");
    for f in ["model.ckpt", "history.jsonl", "predictions.jsonl", "report.json"] {
        assert!(cell.join(f).exists(), "{f}");
    }
    let resolved = mmsa::experiment::ExperimentConfig::load(&root.join("config.json")).unwrap();
    assert_eq!(resolved.cells.len(), 2);

    let results = root.to_str().unwrap();
    let o = mmsa(&["report", "--results", results]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("CC") && table.contains("MAE"));

    let o = mmsa(&["compare", "--results", results, "vocal:S", "verbal:S+P"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("p = "));

    fs::remove_file(cell.join("report.json")).unwrap();
    let o = mmsa(&["report", "--results", results]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("verbal_S+P_seed0"), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("missing"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "vocal:S,visual:S");
    let other = dir.path().join("elsewhere");
    let o = mmsa(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--cells",
        "vocal:S+I",
        "--seed",
        "9",
        "--max-epochs",
        "1",
        "--output-dir",
        other.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = mmsa::experiment::ExperimentConfig::load(&other.join("config.json")).unwrap();
    assert_eq!(resolved.seeds, vec![9]);
    assert_eq!(resolved.train.max_epochs, 1);
    assert_eq!(resolved.cells.len(), 1);
    assert!(other.join("cells/vocal_S+I_seed9/report.json").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "visual:S+I,EF:S");
    let root = dir.path().join("out");
    let read_all = || {
        ["results.jsonl", "significance.jsonl", "table.jsonl", "cells/EF_S_seed0/history.jsonl"]
            .map(|f| fs::read(root.join(f)).unwrap())
    };
    assert!(mmsa(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    let first = read_all();
    assert!(mmsa(&["run", "--config", cfg.to_str().unwrap()]).status.success());
    assert_eq!(first, read_all());
}

/// The full grid on 50 synthetic segments; slow, run with `--ignored`.
#[test]
#[ignore]
fn full_grid_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    fs::write(
        &path,
        format!(
            r#"{{"dataset": {{"synthetic": {{"config": {{"n_segments": 50}}, "seed": 1}}}},
               "split": {{"sizes": {{"train": 30, "validation": 10}}}},
               "output_dir": "{}"}}"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let start = Instant::now();
    let o = mmsa(&["run", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(start.elapsed() < Duration::from_secs(30 * 60), "{:?}", start.elapsed());
}

//! End-to-end checks of the `scout` binary.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn scout(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scout"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SCOUT_API_KEY")
        .env_remove("SCOUT_BASE_URL")
        .env_remove("SCOUT_MODEL")
        .env_remove("SCOUT_PROVIDER")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every file below `dir`, relative to it.
fn tree_of(dir: &Path) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                found.insert(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    found
}

#[test]
fn simulate_writes_one_series_per_ablation() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&scout(&["simulate", "--epochs", "4", "--out", "sim"], tmp.path()));
    let files = tree_of(&tmp.path().join("sim"));
    for f in ["none.tsv", "flat.tsv", "lang-free.tsv", "summary.tsv", "config.toml"] {
        assert!(files.contains(f), "missing {f}: {files:?}");
    }
    let series = std::fs::read_to_string(tmp.path().join("sim/none.tsv")).unwrap();
    assert_eq!(series.lines().count(), 5, "header plus one line per epoch");
    let summary = std::fs::read_to_string(tmp.path().join("sim/summary.tsv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn http_backend_without_credentials_fails_fast() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scout(&["run", "--backend", "http", "--query", "anything", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SCOUT_API_KEY"));
    assert!(!tmp.path().join("r/assets.jsonl").exists(), "nothing is run without credentials");
}

#[test]
fn run_replays_and_evaluate_regrades() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["run", "--query", "stage = \"clinical\"", "--epochs", "5", "--languages", "en,zh,ja", "--out", out];
    ok(&scout(&args("a"), tmp.path()));
    ok(&scout(&args("b"), tmp.path()));
    for f in ["assets.jsonl", "tree.jsonl", "epochs.jsonl", "metrics.tsv", "metrics.txt", "queries.jsonl"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let out = scout(&["evaluate", "--run", "a", "--out", "ev"], tmp.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("match"));
    assert_eq!(
        std::fs::read(tmp.path().join("a/metrics.txt")).unwrap(),
        std::fs::read(tmp.path().join("ev/metrics.txt")).unwrap()
    );
}

#[test]
fn outputs_stay_under_out() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&scout(&["run", "--query", "stage = \"clinical\"", "--epochs", "2", "--out", "only/here"], tmp.path()));
    let files = tree_of(tmp.path());
    assert!(!files.is_empty());
    assert!(files.iter().all(|f| f.starts_with("only/here/")), "{files:?}");
}

#[test]
fn config_validate_accepts_good_and_rejects_bad() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("good.toml"), "[run]\nepochs = 3\nk = 2\n\n[sim.budget]\nper_call = 4\n").unwrap();
    std::fs::write(tmp.path().join("typo.toml"), "[run]\nepoch = 3\n").unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[run]\nk = 0\n").unwrap();
    ok(&scout(&["config", "validate", "good.toml"], tmp.path()));
    assert_eq!(scout(&["config", "validate", "typo.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(scout(&["config", "validate", "bad.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(scout(&["config", "validate", "missing.toml"], tmp.path()).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "[run]\nepochs = 3\nk = 4\nquery = 'stage = \"clinical\"'\n").unwrap();
    ok(&scout(&["run", "--config", "c.toml", "--k", "2", "--out", "r"], tmp.path()));
    let saved = std::fs::read_to_string(tmp.path().join("r/config.toml")).unwrap();
    assert!(saved.contains("epochs = 3"), "{saved}");
    assert!(saved.contains("k = 2"), "{saved}");
    let epochs = std::fs::read_to_string(tmp.path().join("r/epochs.jsonl")).unwrap();
    assert_eq!(epochs.lines().filter(|l| l.contains("\"kind\":\"epoch_report\"")).count(), 3);
}

#[test]
fn benchgen_writes_its_tables() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&scout(&["benchgen", "--limit", "40", "--out", "bg"], tmp.path()));
    let files = tree_of(&tmp.path().join("bg"));
    for f in ["schedule.tsv", "mined.tsv", "benchmark.jsonl", "skipped.tsv"] {
        assert!(files.contains(f), "missing {f}");
    }
    let schedule = std::fs::read_to_string(tmp.path().join("bg/schedule.tsv")).unwrap();
    assert_eq!(schedule.lines().count(), 63, "header plus one cycle");
}

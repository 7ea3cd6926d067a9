use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdrnn_cli::commands::{CHECKPOINT_FILE, COHORT_FILE, VOCAB_FILE};
use sdrnn_cli::{Checkpoint, Container, RunManifest};

fn sdrnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdrnn")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sdrnn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Synthesizes a small cohort into `dir/data`.
fn small_cohort(dir: &Path, patients: usize, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let cfg = write(dir, "gen.cfg", &format!("patients = {patients}\nmax_visits = 15\n"));
    let data = dir.join("data");
    ok(&["synth", "--config", s(&cfg), "--seed", &seed.to_string(), "--out", s(&data)]);
    data
}

fn small_train_cfg(dir: &Path) -> PathBuf {
    write(dir, "train.cfg", "rank = 4\nhidden = 6\nmax_epochs = 3\npatience = 1\ndropout_rate = 0.1\n")
}

fn train(dir: &Path, data: &Path, arch: &str, out: &str) -> PathBuf {
    let cfg = small_train_cfg(dir);
    let out = dir.join(out);
    ok(&[
        "train",
        "--cohort",
        s(&data.join(COHORT_FILE)),
        "--vocab",
        s(&data.join(VOCAB_FILE)),
        "--arch",
        arch,
        "--config",
        s(&cfg),
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    out
}

#[test]
fn synth_is_deterministic_and_reports_density() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_cohort(&dir.path().join("a"), 50, 9);
    let b = small_cohort(&dir.path().join("b"), 50, 9);
    for f in [COHORT_FILE, VOCAB_FILE, "summary.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let summary = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.starts_with("target_density = "));
}

#[test]
fn synth_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(dir.path(), "zero.cfg", "patients = 0\n");
    let out = dir.path().join("zero");
    let r = sdrnn(&["synth", "--config", s(&zero), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.join(COHORT_FILE).exists());

    let unknown = write(dir.path(), "unknown.cfg", "patients = 5\npatient_count = 3\n");
    let r = sdrnn(&["synth", "--config", s(&unknown), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("patient_count"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = sdrnn(&["train", "--cohort", "/nonexistent/c.jsonl", "--vocab", "/nonexistent/v.json", "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn schema_violation_names_line_and_patient() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 20, 1);
    let text = std::fs::read_to_string(data.join(COHORT_FILE)).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen("\"day\":", "\"day\":-", 1);
    write(&data, COHORT_FILE, &(lines.join("\n") + "\n"));
    let r = sdrnn(&[
        "train",
        "--cohort",
        s(&data.join(COHORT_FILE)),
        "--vocab",
        s(&data.join(VOCAB_FILE)),
        "--out",
        s(&dir.path().join("t")),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 60, 2);
    let run1 = train(dir.path(), &data, "gru", "run1");
    let run2 = train(dir.path(), &data, "gru", "run2");
    let ckpt = run1.join(CHECKPOINT_FILE);
    let bytes = std::fs::read(&ckpt).unwrap();
    assert_eq!(bytes, std::fs::read(run2.join(CHECKPOINT_FILE)).unwrap());

    let loaded = Checkpoint::read(&ckpt).unwrap();
    let resaved = dir.path().join("resaved.bin");
    loaded.write(&resaved).unwrap();
    assert_eq!(std::fs::read(&resaved).unwrap(), bytes);

    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(run1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.outputs[CHECKPOINT_FILE], sdrnn_cli::manifest::sha256_file(&ckpt).unwrap());
    let cohort = data.join(COHORT_FILE);
    assert_eq!(manifest.inputs[cohort.to_str().unwrap()], sdrnn_cli::manifest::sha256_file(&cohort).unwrap());

    let eval = |out: &str| {
        let out = dir.path().join(out);
        ok(&["evaluate", "--checkpoint", s(&ckpt), "--cohort", s(&cohort), "--vocab", s(&data.join(VOCAB_FILE)), "--seed", "4", "--out", s(&out)]);
        std::fs::read_to_string(out.join("report.tsv")).unwrap()
    };
    let report = eval("eval1");
    assert_eq!(report, eval("eval2"));
    let rows: Vec<&str> = report.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(rows, ["pooled", "rejection_6m", "rejection_12m", "loss_6m", "loss_12m", "death_6m", "death_12m"]);

    let pred = dir.path().join("pred");
    ok(&["predict", "--checkpoint", s(&ckpt), "--cohort", s(&cohort), "--out", s(&pred)]);
    let text = std::fs::read_to_string(pred.join("predictions.tsv")).unwrap();
    let visits: usize = sdrnn_cli::commands::read_cohort_file(&cohort).unwrap().iter().map(|p| p.visits.len()).sum();
    assert_eq!(text.lines().count(), visits + 1);
    assert!(text.lines().all(|l| l.split('\t').count() == 8));
}

#[test]
fn random_arch_writes_stub_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 30, 3);
    let out = train(dir.path(), &data, "random", "random");
    let c = Container::read(&out.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(c.metadata["arch"], "random");
    assert!(c.arrays.iter().all(|a| !a.name.starts_with("param.")));
    let history = std::fs::read_to_string(out.join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 1);
}

#[test]
fn evaluate_rejects_mismatched_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 30, 5);
    let out = train(dir.path(), &data, "logreg", "lr");
    let other_cfg = write(dir.path(), "other.cfg", "patients = 10\nnum_labs = 7\n");
    let other = dir.path().join("other");
    ok(&["synth", "--config", s(&other_cfg), "--out", s(&other)]);
    let r = sdrnn(&[
        "evaluate",
        "--checkpoint",
        s(&out.join(CHECKPOINT_FILE)),
        "--cohort",
        s(&data.join(COHORT_FILE)),
        "--vocab",
        s(&other.join(VOCAB_FILE)),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("dimension mismatch"));
}

#[test]
fn corrupted_checkpoint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 30, 6);
    let out = train(dir.path(), &data, "static", "st");
    let path = out.join(CHECKPOINT_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[5] = 2;
    std::fs::write(&path, &bytes).unwrap();
    let r = sdrnn(&["predict", "--checkpoint", s(&path), "--cohort", s(&data.join(COHORT_FILE)), "--out", s(&dir.path().join("p"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("version"));
}

#[test]
fn gradcheck_exit_status() {
    let out = ok(&["gradcheck"]);
    for arch in ["rnn", "lstm", "gru", "tle", "logreg", "static"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("{arch}\t"))), "{arch}");
    }
    let names: Vec<&str> = out.lines().skip(1).filter(|l| l.starts_with("gru\t")).map(|l| l.split('\t').nth(1).unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    let r = sdrnn(&["gradcheck", "--arch", "lstm", "--inject-fault"]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn benchmark_random_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_cohort(dir.path(), 200, 7);
    let out = dir.path().join("bench");
    let table = ok(&[
        "benchmark",
        "--cohort",
        s(&data.join(COHORT_FILE)),
        "--vocab",
        s(&data.join(VOCAB_FILE)),
        "--arch",
        "random",
        "--out",
        s(&out),
    ]);
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("Random\t"));
    let auroc: f64 = row.split('\t').nth(2).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((auroc - 0.5).abs() < 0.05, "{row}");
    assert_eq!(std::fs::read_to_string(out.join("splits.tsv")).unwrap().lines().count(), 6);
}

#[test]
fn unknown_arch_is_a_usage_error() {
    let r = sdrnn(&["gradcheck", "--arch", "transformer"]);
    assert_eq!(r.status.code(), Some(2));
}

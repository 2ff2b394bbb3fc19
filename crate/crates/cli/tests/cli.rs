use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn tot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tot"))
        .args(args)
        .current_dir(dir)
        .env_remove("TOT_REPORT_DIR")
        .output()
        .expect("binary runs")
}

fn tot_stdin(dir: &Path, args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_tot"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

/// A config small enough to train in a few seconds.
const SMALL: &str = r#"
[paths]
events = "events.jsonl"
checkpoint = "model.ckpt"
ori_checkpoint = "ori.ckpt"
reports = "reports"

[experiment]
seeds = [0]

[experiment.model]
variant = "baseline_lstm_mm"
hidden_dim = 3
num_modes = 2

[experiment.train]
epochs = 1
batch_size = 32

[ori]
per_activity = 1
label_stride = 60
epochs = 1
"#;

fn small_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(tot(
        dir.path(),
        &["gen-data", "-c", "small.toml", "--per-activity", "2"],
    ));
    dir
}

fn frames_of_first_event(dir: &Path, n: usize) -> String {
    let text = fs::read_to_string(dir.join("events.jsonl")).unwrap();
    let event: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    event["frames"].as_array().unwrap()[..n]
        .iter()
        .map(|f| format!("{f}\n"))
        .collect()
}

#[test]
fn config_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let dump = ok(tot(dir.path(), &["config", "--dump"]));
    assert!(dump.contains("[experiment.model]"));
    fs::write(dir.path().join("c.toml"), &dump).unwrap();
    assert_eq!(
        ok(tot(dir.path(), &["config", "--dump", "-c", "c.toml"])),
        dump
    );
    let seeded = ok(tot(dir.path(), &["config", "--dump", "--seed", "9"]));
    assert!(seeded.contains("seed = 9"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "[experiment.split]\ntrain = 0.5\n",
    )
    .unwrap();
    let o = tot(dir.path(), &["config", "-c", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        tot(dir.path(), &["config", "-c", "missing.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gen_data_is_deterministic_and_summarized() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(tot(
        dir.path(),
        &["gen-data", "--per-activity", "2", "--out", "a.jsonl"],
    ));
    ok(tot(
        dir.path(),
        &["gen-data", "--per-activity", "2", "--out", "b.jsonl"],
    ));
    let total = a.lines().find(|l| l.starts_with("total")).unwrap();
    assert_eq!(total.split_whitespace().last(), Some("16"), "{a}");
    assert!(a.contains("texting"));
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    ok(tot(
        dir.path(),
        &[
            "gen-data",
            "--per-activity",
            "2",
            "--seed",
            "5",
            "--out",
            "c.jsonl",
        ],
    ));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
}

#[test]
fn train_reports_counts_and_history() {
    let dir = small_dir();
    let out = ok(tot(
        dir.path(),
        &["train", "-c", "small.toml", "--augment", "--epochs", "2"],
    ));
    assert!(
        out.contains("raw samples") && out.contains("augmented samples"),
        "{out}"
    );
    let history = fs::read_to_string(dir.path().join("model.history.csv")).unwrap();
    let rows = history
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("epoch"))
        .count();
    assert_eq!(rows, 2);
    assert!(history.contains("# [experiment.model]"));
    assert!(dir.path().join("model.ckpt").exists());
    assert!(!dir.path().join("model.ckpt.partial").exists());
}

#[test]
fn from_ori_needs_a_path() {
    let dir = small_dir();
    let o = tot(dir.path(), &["train", "-c", "small.toml", "--from-ori"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ori_pretrain_then_transfer() {
    let dir = small_dir();
    ok(tot(dir.path(), &["pretrain-ori", "-c", "small.toml"]));
    ok(tot(
        dir.path(),
        &[
            "train",
            "-c",
            "small.toml",
            "--from-ori",
            "ori.ckpt",
            "--out",
            "tl.ckpt",
        ],
    ));
    // a readiness checkpoint has no take-over head
    let o = tot(
        dir.path(),
        &["eval", "-c", "small.toml", "--checkpoint", "ori.ckpt"],
    );
    assert_eq!(o.status.code(), Some(2));
    let out = ok(tot(
        dir.path(),
        &["eval", "-c", "small.toml", "--checkpoint", "tl.ckpt"],
    ));
    assert!(out.starts_with("label,model,dataset"));
}

#[test]
fn eval_modes_and_errors() {
    let dir = small_dir();
    ok(tot(dir.path(), &["train", "-c", "small.toml"]));
    let mp = ok(tot(
        dir.path(),
        &["eval", "-c", "small.toml", "--checkpoint", "model.ckpt"],
    ));
    let bk = ok(tot(
        dir.path(),
        &[
            "eval",
            "-c",
            "small.toml",
            "--checkpoint",
            "model.ckpt",
            "--best-of-k",
            "--out",
            "r.csv",
        ],
    ));
    let overall = |s: &str| -> f64 {
        s.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(7)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(overall(&bk) <= overall(&mp));
    assert!(fs::read_to_string(dir.path().join("r.csv"))
        .unwrap()
        .starts_with("# "));

    let o = tot(
        dir.path(),
        &[
            "eval",
            "-c",
            "small.toml",
            "--checkpoint",
            "model.ckpt",
            "--mask",
            "H",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = tot(
        dir.path(),
        &["eval", "-c", "small.toml", "--checkpoint", "nope.ckpt"],
    );
    assert_eq!(o.status.code(), Some(3));
    fs::write(dir.path().join("junk.jsonl"), "{not json}\n").unwrap();
    let o = tot(
        dir.path(),
        &[
            "eval",
            "-c",
            "small.toml",
            "--checkpoint",
            "model.ckpt",
            "--events",
            "junk.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn best_of_k_needs_multimodal_checkpoint() {
    let dir = small_dir();
    ok(tot(
        dir.path(),
        &["train", "-c", "small.toml", "--variant", "baseline_lstm"],
    ));
    let o = tot(
        dir.path(),
        &[
            "eval",
            "-c",
            "small.toml",
            "--checkpoint",
            "model.ckpt",
            "--best-of-k",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn overfit_checkpoint_scores_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[paths]
events = "events.jsonl"
checkpoint = "fit.ckpt"

[experiment]
augment = false

[experiment.split]
train = 1.0
val = 0.0
test = 0.0

[experiment.model]
variant = "baseline_lstm"
hidden_dim = 16

[experiment.train]
epochs = 1500
batch_size = 5
"#;
    fs::write(dir.path().join("fit.toml"), cfg).unwrap();
    ok(tot(
        dir.path(),
        &["gen-data", "-c", "fit.toml", "--per-activity", "1"],
    ));
    ok(tot(dir.path(), &["train", "-c", "fit.toml"]));
    let out = ok(tot(
        dir.path(),
        &["eval", "-c", "fit.toml", "--checkpoint", "fit.ckpt"],
    ));
    let row = out.lines().nth(1).unwrap();
    for v in row.split(',').skip(4) {
        let mae: f64 = v.parse().unwrap();
        assert!(mae < 0.05, "{row}");
    }
}

#[test]
fn ablate_default_masks_give_eleven_rows() {
    let dir = small_dir();
    let reports: PathBuf = dir.path().join("env_reports");
    let o = Command::new(env!("CARGO_BIN_EXE_tot"))
        .args(["ablate", "-c", "small.toml", "--hidden", "2"])
        .current_dir(dir.path())
        .env("TOT_REPORT_DIR", &reports)
        .output()
        .unwrap();
    ok(o);
    let table = fs::read_to_string(reports.join("ablation.csv")).unwrap();
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("label"))
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("F,"));
    assert!(table.contains("# [ablation]"));
    assert!(reports.join("ablation_curves.csv").exists());
    assert!(!dir.path().join("reports").exists());
}

#[test]
fn sweep_rows_per_fraction() {
    let dir = small_dir();
    ok(tot(
        dir.path(),
        &["sweep", "-c", "small.toml", "--fractions", "0.5,1.0"],
    ));
    let table = fs::read_to_string(dir.path().join("reports/sweep.csv")).unwrap();
    let rows = table
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("label"))
        .count();
    assert_eq!(rows, 2);
    let o = tot(
        dir.path(),
        &["sweep", "-c", "small.toml", "--fractions", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn decide_with_given_takeover_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(tot(
        dir.path(),
        &["decide", "--ttc", "3.0", "--epsilon", "0.5", "--tot", "2.0"],
    ));
    assert!(out.contains("\"verdict\":\"hand_over\""), "{out}");
    let out = ok(tot(
        dir.path(),
        &["decide", "--ttc", "3.0", "--epsilon", "0.5", "--tot", "2.5"],
    ));
    assert!(out.contains("\"verdict\":\"safe_stop\""), "{out}");
    let o = tot(dir.path(), &["decide", "--ttc", "0", "--tot", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tot(dir.path(), &["decide", "--ttc", "3.0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_window_and_stream() {
    let dir = small_dir();
    ok(tot(dir.path(), &["train", "-c", "small.toml"]));
    fs::write(
        dir.path().join("w.jsonl"),
        frames_of_first_event(dir.path(), 75),
    )
    .unwrap();
    let out = ok(tot(
        dir.path(),
        &[
            "predict",
            "-c",
            "small.toml",
            "--checkpoint",
            "model.ckpt",
            "--window",
            "w.jsonl",
        ],
    ));
    let rec: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(rec["end_frame"], 74);
    assert_eq!(rec["modes"].as_array().unwrap().len(), 2);

    let frames = frames_of_first_event(dir.path(), 120);
    let args = [
        "predict",
        "-c",
        "small.toml",
        "--checkpoint",
        "model.ckpt",
        "--stream",
        "--stride",
        "30",
    ];
    let out = ok(tot_stdin(dir.path(), &args, &frames));
    assert_eq!(out.lines().count(), 3);
    assert_eq!(ok(tot_stdin(dir.path(), &args, &frames)), out);

    let args = [
        "decide",
        "-c",
        "small.toml",
        "--checkpoint",
        "model.ckpt",
        "--stream",
        "--ttc",
        "4",
        "--policy",
        "worst-mode",
    ];
    let out = ok(tot_stdin(dir.path(), &args, &frames));
    assert_eq!(out.lines().count(), 61);
    assert!(out.lines().all(|l| l.contains("\"policy\":\"worst_mode\"")));

    let o = tot_stdin(dir.path(), &args, "{\"t\": 0.0, \"x\": [1.0]}\n");
    assert_eq!(o.status.code(), Some(3));
}

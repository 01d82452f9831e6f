use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use snn_delay::train::Checkpoint;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn-delay")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Small coincidence dataset plus its config, in `dir`.
fn synth(dir: &Path) -> std::path::PathBuf {
    let o = bin(&["synth", "--out", p(dir), "--pairs", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("coincidence.cfg")
}

/// metrics.csv without the wall-clock column.
fn curve(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("metrics.csv"))
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(bin(&[]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["train"]).status.code(), Some(1));
}

#[test]
fn one_epoch_writes_one_row_per_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let out = dir.path().join("run");
    let o = bin(&["train", "-c", p(&cfg), "--set", "epochs=1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = curve(&out);
    assert_eq!(rows[0], "epoch,split,loss,accuracy");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,train,") && rows[2].starts_with("1,test,"));
    for f in ["checkpoint.bin", "config.resolved", "delays.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn missing_dataset_fails_before_creating_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bin(&["train", "--set", "train_manifest=/nonexistent/train.json", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let out = dir.path().join("run");
    let o = bin(&["train", "-c", p(&cfg), "--set", "learning_rate=0.1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
    assert!(!out.exists());

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "n_hidden = 4\nwidth = 3\n").unwrap();
    let o = bin(&["train", "-c", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("width"));
}

#[test]
fn resolved_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = bin(&["train", "-c", p(&cfg), "--set", "epochs=2", "--set", "seed=4", "--out", p(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin(&["train", "-c", p(&a.join("config.resolved")), "--out", p(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(curve(&a), curve(&b));
    assert_eq!(
        fs::read_to_string(a.join("config.resolved")).unwrap(),
        fs::read_to_string(b.join("config.resolved")).unwrap()
    );
    assert_eq!(
        Checkpoint::load(a.join("checkpoint.bin")).unwrap().params,
        Checkpoint::load(b.join("checkpoint.bin")).unwrap().params
    );
}

#[test]
fn resume_continues_where_the_run_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let (full, head, tail) = (dir.path().join("full"), dir.path().join("head"), dir.path().join("tail"));
    let run = |epochs: &str, out: &Path, resume: Option<&Path>| {
        let mut args = vec!["train", "-c", p(&cfg), "--set", epochs, "--out", p(out)];
        if let Some(r) = resume {
            args.extend(["--resume", p(r)]);
        }
        let o = bin(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run("epochs=4", &full, None);
    run("epochs=2", &head, None);
    run("epochs=4", &tail, Some(&head.join("checkpoint.bin")));
    assert_eq!(curve(&full), curve(&tail));
    let load = |d: &Path| Checkpoint::load(d.join("checkpoint.bin")).unwrap();
    assert_eq!(load(&full).params, load(&tail).params);
    assert_eq!(load(&full).optimizer, load(&tail).optimizer);
}

#[test]
fn gradcheck_passes_and_detects_broken_traces() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok");
    let o = bin(&["gradcheck", "--seeds", "4", "--out", p(&ok)]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("gradcheck PASS"));
    let csv = fs::read_to_string(ok.join("gradcheck.csv")).unwrap();
    assert!(csv.lines().count() > 1);

    let broken = dir.path().join("broken");
    let o = bin(&["gradcheck", "--seeds", "4", "--corrupt-eligibility", "--out", p(&broken)]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn eval_inspect_and_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let run = dir.path().join("run");
    let o = bin(&["train", "-c", p(&cfg), "--set", "epochs=2", "--out", p(&run)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = run.join("checkpoint.bin");

    let ev = dir.path().join("eval");
    let o = bin(&["eval", "-c", p(&cfg), "--checkpoint", p(&ckpt), "--out", p(&ev)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("test accuracy"));
    assert!(ev.join("eval.csv").exists());

    let o = bin(&["inspect", p(&ckpt)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("w_in") && text.contains("histogram") && text.contains("memory"), "{text}");

    let bytes = fs::read(&ckpt).unwrap();
    let cut = dir.path().join("cut.bin");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(bin(&["inspect", p(&cut)]).status.code(), Some(2));
    let o = bin(&["eval", "-c", p(&cfg), "--set", "n_hidden=7", "--checkpoint", p(&ckpt), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn ablation_writes_run_and_summary_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let out = dir.path().join("abl");
    let o = bin(&[
        "ablate",
        "-c",
        p(&cfg),
        "--set",
        "epochs=1",
        "--set",
        "repeats=2",
        "--protocol",
        "fixed_vs_learnable",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = fs::read_to_string(out.join("ablation_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2);
    let summary = fs::read_to_string(out.join("ablation_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2);

    let o = bin(&["ablate", "-c", p(&cfg), "--protocol", "nonsense", "--out", p(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
}

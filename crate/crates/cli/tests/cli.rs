use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = "n_frames = 4\nd_a = 2\nd_m = 2\nd_w = 6\nd_h = 8\nmax_len = 6\nbeam_size = 3\n\n[optim]\nepochs = 3\nbatch_size = 4\n";

fn sgn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = sgn(args);
    assert!(
        out.status.success(),
        "sgn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic corpus plus a matching small config in `dir`.
fn setup(dir: &Path) {
    let corpus = dir.join("corpus");
    ok(&[
        "synth", "--out", p(&corpus), "--videos", "12", "--concepts", "5", "--segments", "2",
        "--frames-per-segment", "2", "--d-a", "2", "--d-m", "2", "--seed", "3",
    ]);
    fs::write(dir.join("config.toml"), CONFIG).unwrap();
}

#[test]
fn train_generate_inspect_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let (corpus, cfg, run) = (dir.join("corpus"), dir.join("config.toml"), dir.join("run"));
    let summary: Value =
        serde_json::from_str(ok(&["train", "--config", p(&cfg), "--corpus", p(&corpus), "--out", p(&run)]).trim()).unwrap();
    assert_eq!(summary["model"], "SA+PS+CA");
    assert_eq!(summary["epochs"], 3);
    for f in ["config.toml", "vocab.txt", "metrics.jsonl", "last.ckpt", "best.ckpt"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    for line in fs::read_to_string(run.join("metrics.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["event"] == "step" || v["event"] == "epoch");
    }

    let ckpt = run.join("last.ckpt");
    let greedy = ok(&["generate", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--greedy"]);
    let beam1 = ok(&["generate", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--beam", "1"]);
    assert_eq!(greedy, beam1);
    assert_eq!(greedy.lines().count(), 12);
    let beam3 = ok(&["generate", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--beam", "3"]);
    assert_eq!(beam3.lines().count(), 12);

    let inspect = ok(&["inspect", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--video", "synth00000"]);
    let records: Vec<Value> = inspect.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!records.is_empty());
    assert_eq!(records[0]["t"], 1);
    assert!(records.iter().all(|r| r["video_id"] == "synth00000"));

    let cands = dir.join("cands.tsv");
    fs::write(&cands, &greedy).unwrap();
    let eval: Value = serde_json::from_str(&ok(&[
        "eval", "--candidates", p(&cands), "--references", p(&corpus.join("manifest.tsv")), "--config", p(&cfg),
    ]))
    .unwrap();
    assert_eq!(eval["n_videos"], 12);
    for k in ["bleu4", "cider_d", "rouge_l"] {
        assert!(eval[k].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(eval["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn ablate_labels_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);
    let out = ok(&[
        "ablate", "--config", p(&dir.join("config.toml")), "--corpus", p(&dir.join("corpus")), "--variants",
        "none;sa,ps,ca", "--seeds", "1", "--epochs", "2",
    ]);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["label"], "TA baseline");
    assert!(lines[0].get("alignment").is_none());
    assert_eq!(lines[1]["label"], "SA+PS+CA");
    assert!(lines[1]["alignment"].as_f64().is_some());
    assert_eq!(lines[2]["summary"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_reports_fits() {
    let out = ok(&["bench", "--frames", "6", "--max-len", "6", "--repeats", "5", "--warmup", "1", "--vocab", "50"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    for k in ["sgn", "ta"] {
        assert_eq!(v[k]["median_us"].as_array().unwrap().len(), 6);
        assert!(v[k]["fit"]["slope"].as_f64().is_some());
    }
    assert!(v["sgn_slope_positive"].is_boolean());
}

#[test]
fn exit_codes() {
    assert_eq!(sgn(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(sgn(&[]).status.code(), Some(2));
    assert_eq!(sgn(&["--help"]).status.code(), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.ckpt");
    let out = sgn(&["generate", "--checkpoint", p(&missing), "--corpus", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "tau = 2.0\n").unwrap();
    let out = sgn(&["train", "--config", p(&bad), "--corpus", p(tmp.path()), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = sgn(&["train", "--corpus", p(tmp.path()), "--out", p(&tmp.path().join("o")), "--ablation", "ps"]);
    assert_eq!(out.status.code(), Some(2));
}

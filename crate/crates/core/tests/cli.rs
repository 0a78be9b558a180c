//! End-to-end runs of the `qsrec` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsrec::synthetic::{two_interest_corpus, TwoInterestConfig};

fn qsrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsrec")).args(args).env("QS_THREADS", "2").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qsrec(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Click CSV spread over three days, sessions in the planted two-interest pattern.
fn write_clicks(dir: &Path) -> PathBuf {
    let cfg = TwoInterestConfig { vocab_size: 40, sub_interests: 4, train_sessions: 300, ..TwoInterestConfig::default() };
    let corpus = two_interest_corpus(cfg, 3).unwrap();
    let mut csv = String::from("SessionId,ItemId,Time\n");
    for (s, items) in corpus.train.sessions.iter().enumerate() {
        let start = 1_400_000_000 + (s as i64 % 3) * 86_400 + s as i64 * 10;
        for (t, item) in items.iter().enumerate() {
            writeln!(csv, "{s},item{item},{}", start + t as i64).unwrap();
        }
    }
    let path = dir.join("clicks.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    let body = format!(
        "head = matrix\norder = 3\ninput_dim = 4\nlearning_rate = 0.01\nbatch_size = 16\ndropout_keep = 0.5\nseed = 5\nmin_item_support = 1\n{extra}"
    );
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn ingest_train_index_query_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let clicks = write_clicks(d);
    let cfg2 = write_config(d, "two.cfg", "epochs = 2\n");
    let (train, test) = (d.join("train.qsc"), d.join("test.qsc"));

    let summary = ok(&["ingest", "--input", p(&clicks), "--config", p(&cfg2), "--train-out", p(&train), "--test-out", p(&test)]);
    assert!(summary.starts_with("V\t40\n"), "{summary}");
    let first = std::fs::read(&train).unwrap();
    let (train2, test2) = (d.join("train2.qsc"), d.join("test2.qsc"));
    ok(&["ingest", "--input", p(&clicks), "--config", p(&cfg2), "--train-out", p(&train2), "--test-out", p(&test2)]);
    assert_eq!(first, std::fs::read(&train2).unwrap());
    assert_eq!(std::fs::read(&test).unwrap(), std::fs::read(&test2).unwrap());

    // Two epochs straight through, and one epoch followed by a resume.
    let (full, trace_full) = (d.join("full.qsm"), d.join("full.trace"));
    ok(&["train", "--corpus", p(&train), "--config", p(&cfg2), "--out", p(&full), "--trace", p(&trace_full)]);
    let cfg1 = write_config(d, "one.cfg", "epochs = 1\n");
    let (part, trace_part) = (d.join("part.qsm"), d.join("part.trace"));
    ok(&["train", "--corpus", p(&train), "--config", p(&cfg1), "--out", p(&part), "--trace", p(&trace_part)]);
    ok(&["train", "--corpus", p(&train), "--config", p(&cfg2), "--out", p(&part), "--trace", p(&trace_part), "--resume", p(&part)]);
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
    let trace = std::fs::read_to_string(&trace_full).unwrap();
    assert_eq!(trace, std::fs::read_to_string(&trace_part).unwrap());
    let line = trace.lines().next().unwrap();
    let fields: Vec<&str> = line.split(' ').collect();
    assert_eq!((fields[0], fields[1], fields[2], fields[4]), ("epoch", "1", "step", "loss"), "{line}");
    assert!(fields[5].parse::<f64>().unwrap().is_finite());
    assert!(trace.lines().any(|l| l.starts_with("epoch 2 ")));

    let header = ok(&["inspect", "--checkpoint", p(&full)]);
    assert!(header.contains("head:        matrix") && header.contains("epochs done: 2"), "{header}");

    // Query: exhaustive decomposition equals the index-free answer.
    let (flat, decomp) = (d.join("flat.qsi"), d.join("decomp.qsi"));
    ok(&["index", "--checkpoint", p(&full), "--kind", "flatten", "--out", p(&flat)]);
    ok(&["index", "--checkpoint", p(&full), "--kind", "decomp", "--out", p(&decomp)]);
    let plain = ok(&["query", "--checkpoint", p(&full), "--n", "40", "1", "2", "3"]);
    let via_decomp = ok(&["query", "--checkpoint", p(&full), "--index", p(&decomp), "--n", "40", "--k", "3", "1", "2", "3"]);
    let via_flat = ok(&["query", "--checkpoint", p(&full), "--index", p(&flat), "--n", "40", "1", "2", "3"]);
    assert_eq!(plain, via_decomp);
    assert_eq!(plain, via_flat);
    let top5 = ok(&["query", "--checkpoint", p(&full), "--n", "5", "1", "2", "3"]);
    let scores: Vec<f64> = top5.lines().map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(scores.len(), 5);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    // Evaluation with and without the flatten index agrees.
    let direct = ok(&["eval", "--checkpoint", p(&full), "--corpus", p(&test), "--k", "5"]);
    let indexed = ok(&["eval", "--checkpoint", p(&full), "--corpus", p(&test), "--k", "5", "--index", p(&flat)]);
    let metrics = |s: &str| s.lines().next().unwrap().split('\t').skip(1).map(str::to_string).collect::<Vec<_>>();
    assert_eq!(metrics(&direct), metrics(&indexed));
    assert!(direct.starts_with("matrix\t5\t"), "{direct}");

    // An index built from another model is refused.
    let other = d.join("other.qsm");
    let cfg_other = d.join("other.cfg");
    std::fs::write(&cfg_other, std::fs::read_to_string(&cfg2).unwrap().replace("seed = 5", "seed = 6")).unwrap();
    ok(&["train", "--corpus", p(&train), "--config", p(&cfg_other), "--out", p(&other)]);
    let stale = qsrec(&["eval", "--checkpoint", p(&other), "--corpus", p(&test), "--index", p(&flat)]);
    assert!(!stale.status.success());
    assert!(String::from_utf8_lossy(&stale.stderr).contains("rebuild the index"));
}

#[test]
fn malformed_input_leaves_no_cache() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.csv");
    std::fs::write(&bad, "SessionId,ItemId,Time\n1,a,1\n1,b,oops\n2,,3\n").unwrap();
    let out = qsrec(&["ingest", "--input", p(&bad), "--train-out", p(&d.join("t.qsc")), "--test-out", p(&d.join("e.qsc"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    assert_eq!(std::fs::read_dir(d).unwrap().count(), 1);
}

#[test]
fn grad_check_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lines = "a b c d\ne f g\nh i j k l\nm n\na e h m\nb f i\nc g j n\nd k l a\n";
    let playlists = d.join("tiny.txt");
    std::fs::write(&playlists, lines).unwrap();
    let cfg = d.join("tiny.cfg");
    std::fs::write(&cfg, "head = fc\norder = 3\ninput_dim = 3\nhidden_dim = 4\nepochs = 1\nbatch_size = 4\nmin_item_support = 1\n").unwrap();
    let (train, test) = (d.join("train.qsc"), d.join("test.qsc"));
    ok(&[
        "ingest", "--input", p(&playlists), "--format", "playlist_lines", "--split", "buckets", "--seed", "1", "--config", p(&cfg),
        "--train-out", p(&train), "--test-out", p(&test),
    ]);
    let report = ok(&["train", "--corpus", p(&train), "--config", p(&cfg), "--out", p(&d.join("x.qsm")), "--grad-check"]);
    assert!(report.contains("max relative error"), "{report}");
    assert!(!d.join("x.qsm").exists());
}

#[test]
fn usage_errors_exit_non_zero() {
    assert!(!qsrec(&["train"]).status.success());
    assert!(!qsrec(&["inspect"]).status.success());
    let missing = qsrec(&["inspect", "--checkpoint", "/nonexistent.qsm"]);
    assert!(!missing.status.success());
}

#[test]
fn inspect_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    std::fs::write(&cfg, "head = vector\ninput_dim = 32\nhidden_dim = 64\n").unwrap();
    let out = ok(&["inspect", "--config", p(&cfg), "--vocab", "37958"]);
    assert!(out.contains("input_embedding") && out.contains("gru_cell/candidate/bias"));
    assert!(out.trim_end().ends_with("3700550"), "{out}");
}

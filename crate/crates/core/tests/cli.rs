use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn jointvec(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_jointvec"))
        .args(args)
        .env_remove("JOINTVEC_DATA")
        .output()
        .unwrap();
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn ok(args: &[&str]) -> Run {
    let r = jointvec(args);
    assert_eq!(r.code, 0, "jointvec {}: {}", args.join(" "), r.stderr);
    r
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, kind: &str) -> PathBuf {
    let d = dir.join(kind);
    ok(&["generate", kind, "--out", s(&d)]);
    d
}

const SMALL: [&str; 8] = [
    "--set",
    "ngram_order=3",
    "--set",
    "block_size=300",
    "--set",
    "gd_words=100",
    "--dim",
    "6",
];

fn train_toy(toy: &Path, out: &Path, objective: &str, extra: &[&str]) -> Run {
    let (c, h, m) = (
        toy.join("corpus.txt"),
        toy.join("hypernyms.tsv"),
        toy.join("members.tsv"),
    );
    let mut args = vec!["train", "--objective", objective, "--out", s(out)];
    args.extend(["--corpus", s(&c), "--hypernyms", s(&h), "--members", s(&m)]);
    args.extend(SMALL);
    args.extend(extra);
    jointvec(&args)
}

#[test]
fn train_writes_checkpoints_and_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    let r = train_toy(&toy, &out, "nlm+gd", &["--iters", "6", "--set", "checkpoint_every=2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for ck in ["iter-000002", "iter-000004", "final"] {
        for f in ["w.vec", "v.vec", "y.vec", "nlm.params", "rel.params"] {
            assert!(out.join(ck).join(f).is_file(), "{ck}/{f}");
        }
    }
    assert!(!out.join("iter-000006").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,joint_loss,mean_y_norm,mean_scaled_residual");
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("6,"));

    // Replaying the checkpoints reproduces their rows.
    let d = ok(&["diagnose", s(&out)]);
    let replay: Vec<&str> = d.stdout.lines().collect();
    assert_eq!(replay[0], lines[0]);
    assert_eq!(&replay[1..], &[lines[2], lines[4], lines[6]]);
}

#[test]
fn zero_iterations_write_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    let r = train_toy(&toy, &out, "nlm", &["--iters", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(out.join("final/w.vec").is_file());
    assert!(!out.join("final/v.vec").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn divergence_exits_with_code_two_and_keeps_the_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    let r = train_toy(&toy, &out, "nlm+gd", &["--iters", "400", "--set", "lr_gd=1000"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("diverged"), "{}", r.stderr);
    assert!(out.join("last_good/w.vec").is_file());
    assert!(!out.join("final").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let good: usize = last.split(',').next().unwrap().parse().unwrap();
    assert!(r.stderr.contains(&format!("iteration {}", good + 1)), "{}", r.stderr);
}

#[test]
fn kb_evaluation_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = generate(tmp.path(), "planted");
    let out = tmp.path().join("run");
    let (h, m, t) = (kb.join("hypernyms.tsv"), kb.join("members.tsv"), kb.join("train.tsv"));
    ok(&[
        "train",
        "--objective",
        "transe",
        "--dim",
        "10",
        "--iters",
        "300",
        "--set",
        "lr_kb=0.03",
        "--hypernyms",
        s(&h),
        "--members",
        s(&m),
        "--train-tuples",
        s(&t),
        "--out",
        s(&out),
    ]);
    let results = tmp.path().join("kb.csv");
    let (dev, test) = (kb.join("dev.tsv"), kb.join("test.tsv"));
    let r = ok(&[
        "eval",
        "kb",
        "--checkpoint",
        s(&out.join("final")),
        "--dev",
        s(&dev),
        "--test",
        s(&test),
        "--out",
        s(&results),
    ]);
    let acc: f64 = r
        .stdout
        .split("accuracy ")
        .nth(1)
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.9, "{}", r.stdout);
    assert!(fs::read_to_string(&results).unwrap().lines().count() > 1);
}

#[test]
fn kb_evaluation_rejects_a_graph_distance_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    assert_eq!(train_toy(&toy, &out, "nlm+gd", &["--iters", "1"]).code, 0);
    let f = tmp.path().join("x.tsv");
    fs::write(&f, "").unwrap();
    let r = jointvec(&[
        "eval",
        "kb",
        "--checkpoint",
        s(&out.join("final")),
        "--dev",
        s(&f),
        "--test",
        s(&f),
        "--out",
        s(&tmp.path().join("kb.csv")),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("TransE or NTN"), "{}", r.stderr);
}

#[test]
fn clusters_with_one_word_per_cluster_have_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    fs::write(&corpus, "red green blue\nblue green red\ngreen red blue\n").unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "train",
        "--objective",
        "nlm",
        "--iters",
        "0",
        "--dim",
        "4",
        "--set",
        "ngram_order=3",
        "--corpus",
        s(&corpus),
        "--out",
        s(&out),
    ]);
    let tsv = tmp.path().join("clusters.tsv");
    ok(&[
        "eval",
        "clusters",
        "--checkpoint",
        s(&out.join("final")),
        "--k",
        "3",
        "--out",
        s(&tsv),
    ]);
    let text = fs::read_to_string(&tsv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# sse=0"));
    assert_eq!(lines.next(), Some("word\tcluster_id"));
    let mut ids: Vec<&str> = lines.map(|l| l.split('\t').nth(1).unwrap()).collect();
    ids.sort_unstable();
    ids.dedup();
    // The rare word is not clustered.
    assert_eq!(ids.len(), 3);
}

#[test]
fn missing_inputs_are_named() {
    let tmp = tempfile::tempdir().unwrap();
    let gone = tmp.path().join("nope.txt");
    let r = jointvec(&[
        "train",
        "--objective",
        "nlm",
        "--corpus",
        s(&gone),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("nope.txt"), "{}", r.stderr);

    let r = jointvec(&["train", "--objective", "nlm+gd", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(r.code, 1);

    let r = jointvec(&["train", "--objective", "bogus", "--out", "x"]);
    assert_ne!(r.code, 0);
}

#[test]
fn bad_config_values_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    let r = train_toy(&toy, &out, "nlm", &["--set", "nlm_hidden=0"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("nlm_hidden"), "{}", r.stderr);
    let r = train_toy(&toy, &out, "nlm", &["--alpha", "1.5"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "dim = 5\nno equals sign\n").unwrap();
    let r = train_toy(&toy, &out, "nlm", &["--config", s(&cfg)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains(":2"), "{}", r.stderr);
}

#[test]
fn data_root_resolves_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), "toy");
    let out = tmp.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_jointvec"))
        .args([
            "train",
            "--objective",
            "nlm",
            "--iters",
            "1",
            "--corpus",
            "toy/corpus.txt",
        ])
        .args(SMALL)
        .args(["--out", s(&out)])
        .env("JOINTVEC_DATA", tmp.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("final/w.vec").is_file());
}

#[test]
fn vocab_build_counts_lowercased_tokens() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c.txt");
    fs::write(&corpus, "The cat\nthe dog the\n").unwrap();
    let r = ok(&["vocab", "build", "--corpus", s(&corpus), "--max-size", "2"]);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert!(lines.contains(&"the\t3"), "{}", r.stdout);
    assert!(lines.contains(&"cat\t1"), "{}", r.stdout);
    assert!(!lines.iter().any(|l| l.starts_with("dog")), "{}", r.stdout);
}

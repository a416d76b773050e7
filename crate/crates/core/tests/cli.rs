use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hin_embed::cli::{PipelineConfig, ARTIFACTS};
use sha2::{Digest, Sha256};

fn demo(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo").join(file)
}

fn hin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hin"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn hin")
}

fn ok(args: &[&str]) -> String {
    let out = hin(args);
    assert!(
        out.status.success(),
        "hin {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn small_train(dir: &Path, name: &str) -> PathBuf {
    let ckpt = dir.join(name);
    let schema = demo("schema.txt");
    let edges = demo("edges.tsv");
    ok(&[
        "train", "--schema", s(&schema), "--edges", s(&edges), "--dim", "8", "--epochs", "2", "--seed", "5", "--out",
        s(&ckpt),
    ]);
    ckpt
}

#[test]
fn train_with_missing_schema_exits_2_naming_the_path() {
    let out = hin(&["train", "--schema", "/no/such/schema.txt", "--edges", "/no/edges.tsv", "--out", "/tmp/x.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.lines().find(|l| l.starts_with("error ")).expect("error line");
    assert!(line.contains("kind=missing_file"), "{line}");
    assert!(line.contains("/no/such/schema.txt"), "{line}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = hin(&["train", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=usage"), "{err}");
}

#[test]
fn query_before_index_is_a_stage_order_error() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("missing.hidx");
    let out = hin(&["index", "query", "--idx", s(&idx), "--query-id", "user1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("kind=stage_order"));
}

#[test]
fn show_config_prints_resolved_values_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.toml");
    std::fs::write(&cfg_path, "seed = 3\n[train]\ndim = 12\nepochs = 4\n").unwrap();
    let text = ok(&["--config", s(&cfg_path), "--show-config", "train", "--epochs", "9", "--out", "m.ckpt"]);
    let cfg: PipelineConfig = toml::from_str(&text).unwrap();
    assert_eq!((cfg.seed, cfg.train.dim, cfg.train.epochs, cfg.workers), (3, 12, 9, 1));
    let defaults: PipelineConfig = toml::from_str(&ok(&["--show-config"])).unwrap();
    assert_eq!(defaults, PipelineConfig::default());
}

#[test]
fn run_logs_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hin"))
        .args(["--seed", "17", "ingest", "--schema", s(&demo("schema.txt")), "--edges", s(&demo("edges.tsv")), "--out"])
        .arg(dir.path())
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("seed 17"), "{err}");
    assert!(err.contains("resolved config") && err.contains("[train]"), "{err}");
    let stats = std::fs::read_to_string(dir.path().join("stats.tsv")).unwrap();
    assert!(stats.contains("relation\tfav\t"));
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_train(dir.path(), "a.ckpt");
    let b = small_train(dir.path(), "b.ckpt");
    assert_eq!(sha(&a), sha(&b));
    let report = std::fs::read_to_string(dir.path().join("a.ckpt.loss.tsv")).unwrap();
    assert!(report.starts_with("epoch\tbucket_i\tbucket_j\tmean_loss"));
}

#[test]
fn subcommands_chain_end_to_end_without_touching_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let inputs = [demo("schema.txt"), demo("edges.tsv"), demo("edges_v2.tsv")];
    let before: Vec<_> = inputs.iter().map(|p| sha(p)).collect();

    ok(&["coembed", "--schema", s(&inputs[0]), "--edges", s(&inputs[1]), "--out", s(&d.join("co"))]);
    let groups = std::fs::read_to_string(d.join("co/groups.tsv")).unwrap();
    assert!(groups.contains("follows\tfollows,reply"), "{groups}");
    assert!(groups.contains("fav\tfav,reply"), "{groups}");

    let fav_edges = d.join("co/fav/edges.tsv");
    ok(&[
        "eval", "split", "--schema", s(&d.join("co/fav/schema.txt")), "--edges", s(&fav_edges), "--relation", "fav",
        "--fraction", "0.2", "--train-out", s(&d.join("train.tsv")), "--test-out", s(&d.join("test.tsv")),
    ]);
    let ckpt = d.join("m.ckpt");
    ok(&[
        "train", "--schema", s(&d.join("co/fav/schema.txt")), "--edges", s(&d.join("train.tsv")), "--dim", "8",
        "--epochs", "3", "--out", s(&ckpt),
    ]);
    let lp = ok(&[
        "eval", "linkpred", "--ckpt", s(&ckpt), "--split", s(&d.join("test.tsv")), "--train-edges",
        s(&d.join("train.tsv")), "--k", "10,20,50", "--filter-train",
    ]);
    for key in ["queries\t", "recall@10\t", "recall@20\t", "recall@50\t", "mrr\t"] {
        assert!(lp.contains(key), "{lp}");
    }

    let centroids = d.join("c.ckpt");
    ok(&["cluster", "--ckpt", s(&ckpt), "--table", "tweet", "--k", "8", "--out", s(&centroids)]);
    let mix = d.join("mix.tsv");
    ok(&[
        "mixture", "--ckpt", s(&ckpt), "--edges", s(&d.join("train.tsv")), "--centroids", s(&centroids),
        "--source-type", "user", "--target-type", "tweet", "--m", "3", "--out", s(&mix), "--oov-edges",
        s(&inputs[2]), "--oov-out", s(&d.join("oov.tsv")),
    ]);
    let first = std::fs::read_to_string(&mix).unwrap();
    let fields: Vec<&str> = first.lines().next().unwrap().split('\t').collect();
    assert_eq!(fields[0], "user");
    let weights: f64 = fields[2].split(',').map(|c| c.split(':').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((weights - 1.0).abs() < 1e-9);

    let idx = d.join("tweets.hidx");
    ok(&["index", "build", "--vectors", s(&ckpt), "--table", "tweet", "--out", s(&idx)]);
    let single = ok(&[
        "index", "query", "--idx", s(&idx), "--query-id", "user3", "--query-type", "user", "--relation", "fav", "--k",
        "20",
    ]);
    let rows: Vec<&str> = single.lines().collect();
    assert_eq!(rows[0], "rank\tid\tscore\tcomponent");
    assert_eq!(rows.len(), 21);
    assert!(rows[1].starts_with("1\ttweet"));
    let multi = ok(&[
        "index", "query", "--idx", s(&idx), "--query-id", "user3", "--query-type", "user", "--mixture", s(&mix),
        "--centroids", s(&centroids), "--k", "20",
    ]);
    assert!(multi.lines().count() > 1 && multi.lines().count() <= 21);
    let batch = ok(&[
        "query", "--idx", s(&idx), "--query-id", "user3", "user4", "--query-type", "user", "--relation", "fav", "--k", "5",
    ]);
    assert_eq!(batch.lines().count(), 11);

    let cb = d.join("cb.ckpt");
    let codes = d.join("codes.pqc");
    ok(&["pq", "train", "--ckpt", s(&ckpt), "--table", "tweet", "--m", "4", "--out", s(&cb)]);
    ok(&["pq", "encode", "--ckpt", s(&ckpt), "--table", "tweet", "--codebook", s(&cb), "--out", s(&codes)]);
    ok(&["pq", "decode", "--codes", s(&codes), "--codebook", s(&cb), "--out", s(&d.join("dec.ckpt"))]);
    let report = ok(&["pq", "report", "--ckpt", s(&ckpt), "--table", "tweet", "--codebook", s(&cb)]);
    assert!(report.contains("factor\t8\n"), "{report}");
    ok(&["index", "build", "--vectors", s(&d.join("dec.ckpt")), "--table", "decoded", "--exact", "--out", s(&d.join("dec.hidx"))]);

    let next = d.join("next.ckpt");
    ok(&[
        "retrain", "--prev", s(&ckpt), "--edges", s(&d.join("train.tsv")), "--mode", "anchor", "--alpha", "1",
        "--epochs", "1", "--out", s(&next),
    ]);
    let drift = std::fs::read_to_string(d.join("next.ckpt.drift.tsv")).unwrap();
    assert!(drift.contains("decile\tcount\tmean_l2\tmax_l2"));
    assert_eq!(drift.lines().filter(|l| !l.starts_with('#')).count(), 11);

    std::fs::write(d.join("labels.txt"), "1\n0\n1\n0\n").unwrap();
    std::fs::write(d.join("preds.txt"), "0.9\n0.1\n0.8\n0.3\n").unwrap();
    let rce = ok(&["eval", "rce", "--labels", s(&d.join("labels.txt")), "--preds", s(&d.join("preds.txt"))]);
    assert!(rce.contains("prior\t0.5\n"), "{rce}");

    let after: Vec<_> = inputs.iter().map(|p| sha(p)).collect();
    assert_eq!(before, after);
}

fn artifact_hashes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files
        .into_iter()
        .map(|f| (f.strip_prefix(dir).unwrap().to_path_buf(), sha(&f)))
        .collect()
}

#[test]
fn pipeline_on_demo_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["pipeline", "--config", s(&demo("demo.toml")), "--out-dir", s(&out)]);
    for a in ARTIFACTS {
        let p = out.join(a);
        assert!(p.is_file(), "missing artifact {a}");
        assert!(std::fs::metadata(&p).unwrap().len() > 0, "empty artifact {a}");
    }
    let lp = std::fs::read_to_string(out.join("eval/linkpred.tsv")).unwrap();
    assert!(lp.contains("recall@50\t"));
    assert!(artifact_hashes(&out).len() >= ARTIFACTS.len());
}

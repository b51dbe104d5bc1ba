//! Command-line behaviour, both in-process and through the built binary.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use sememelm::cli::{self, synth};

use common::{fixture_dir, synth_bundle_file, synth_dir};

fn run(args: &[&str]) -> (i32, String) {
    let mut argv = vec!["sememelm"];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    let code = cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sememelm"))
}

fn synth_file(name: &str) -> PathBuf {
    synth_dir().join(name)
}

#[test]
fn synth_output_matches_committed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&["synth", "--seed", "1", "--out", p(dir.path())]);
    assert_eq!(code, 0);
    let mut names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        let got = std::fs::read(dir.path().join(&name)).unwrap();
        let want = std::fs::read(synth_dir().join(&name)).unwrap();
        assert!(got == want, "{name:?} differs from the committed fixture");
    }
}

#[test]
fn build_graph_counts_match_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let (code, stdout) = run(&[
        "build-graph",
        "--lexicon",
        p(&synth_file(synth::LEXICON_FILE)),
        "--triples",
        p(&synth_file(synth::TRIPLES_FILE)),
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0);
    let counts: Value = serde_json::from_str(stdout.trim()).unwrap();

    let mut sememes = BTreeSet::new();
    let mut words = 0;
    for line in std::fs::read_to_string(synth_file(synth::LEXICON_FILE))
        .unwrap()
        .lines()
    {
        let v: Value = serde_json::from_str(line).unwrap();
        words += 1;
        for sense in v["senses"].as_array().unwrap() {
            for s in sense.as_array().unwrap() {
                sememes.insert(s.as_str().unwrap().to_string());
            }
        }
    }
    let mut types = BTreeSet::new();
    let mut edges = 0;
    for line in std::fs::read_to_string(synth_file(synth::TRIPLES_FILE))
        .unwrap()
        .lines()
    {
        let f: Vec<&str> = line.split('\t').collect();
        sememes.insert(f[0].to_string());
        sememes.insert(f[2].to_string());
        types.insert(f[1].to_string());
        edges += 1;
    }
    assert_eq!(counts["nodes"], sememes.len());
    assert_eq!(counts["edges"], edges);
    assert_eq!(counts["relation_types"], types.len());
    assert_eq!(counts["words"], words);
    assert!(out.exists());
}

#[test]
fn eval_matches_committed_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let tsv = dir.path().join("summary.tsv");
    let (code, stdout) = run(&[
        "eval",
        "--checkpoint",
        p(&fixture_dir().join("tiny_checkpoint.json")),
        "--dataset",
        p(&synth_file(synth::ANALOGY_FILE)),
        "--report",
        p(&report),
        "--tsv",
        p(&tsv),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("accuracy 0.3450"));
    let got = std::fs::read_to_string(&report).unwrap();
    let want = std::fs::read_to_string(fixture_dir().join("tiny_report.json")).unwrap();
    assert_eq!(got, want);
    let line = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("analogy\t"));
}

#[test]
fn vector_offset_baseline_runs_without_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("words.vec");
    std::fs::write(&emb, "a 1 0\nb 2 0\nc 0 1\nd 1 1\ne 0 3\nf 5 5\n").unwrap();
    let data = dir.path().join("toy.jsonl");
    std::fs::write(
        &data,
        "{\"stem\":[\"a\",\"b\"],\"choice\":[[\"c\",\"e\"],[\"c\",\"d\"]],\"answer\":1}\n",
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let (code, _) = run(&[
        "eval",
        "--baseline",
        "vector-offset",
        "--embeddings",
        p(&emb),
        "--dataset",
        p(&data),
        "--report",
        p(&report),
    ]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["dataset"], "toy");

    let (code, _) = run(&[
        "eval",
        "--baseline",
        "vector-offset",
        "--dataset",
        p(&data),
        "--report",
        p(&report),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec![
            "eval".into(),
            "--checkpoint".into(),
            "/nonexistent/ck.json".into(),
            "--dataset".into(),
            p(&synth_file(synth::ANALOGY_FILE)).into(),
            "--report".into(),
            p(&dir.path().join("r.json")).into(),
        ],
        vec![
            "build-graph".into(),
            "--lexicon".into(),
            "/nonexistent/lex.jsonl".into(),
            "--triples".into(),
            p(&synth_file(synth::TRIPLES_FILE)).into(),
            "--out".into(),
            p(&dir.path().join("g.json")).into(),
        ],
        vec![
            "embed".into(),
            "--checkpoint".into(),
            p(&synth_file(synth::LEXICON_FILE)).into(),
            "--head".into(),
            "a".into(),
            "--tail".into(),
            "b".into(),
        ],
        vec![
            "train".into(),
            "--graph".into(),
            p(&synth_bundle_file()).into(),
            "--relations".into(),
            p(&synth_file(synth::RELATIONS_FILE)).into(),
            "--embeddings".into(),
            p(&synth_file(synth::EMBEDDINGS_FILE)).into(),
            "--set".into(),
            "tau=-1".into(),
            "--out".into(),
            p(&dir.path().join("ck.json")).into(),
        ],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error:")).collect();
        assert_eq!(lines.len(), 1, "{err}");
        let kind = lines[0].split(':').nth(1).unwrap().trim();
        assert!(
            kind.chars().all(|c| c.is_ascii_lowercase() || c == '_'),
            "{}",
            lines[0]
        );
    }
}

fn train_args<'a>(dir: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = [
        "train",
        "--graph",
        p(&synth_bundle_file()),
        "--relations",
        p(&synth_file(synth::RELATIONS_FILE)),
        "--embeddings",
        p(&synth_file(synth::EMBEDDINGS_FILE)),
        "--config",
        p(&synth_file(synth::CONFIG_FILE)),
        "--out",
        p(&dir.join("ck.json")),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

#[test]
fn seed_environment_variable_overrides_config_but_not_flags() {
    let dir = tempfile::tempdir().unwrap();
    let seed_of = |extra: &[&str]| -> u64 {
        let out = bin()
            .args(train_args(
                dir.path(),
                &[&["--set", "epochs=1", "--set", "encoder_dim=4"], extra].concat(),
            ))
            .env("SEMEMELM_SEED", "77")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let ck: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("ck.json")).unwrap()).unwrap();
        assert_eq!(ck["seed"], ck["config"]["seed"]);
        ck["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[]), 77);
    assert_eq!(seed_of(&["--set", "seed=3"]), 3);
}

#[test]
fn disabled_contrastive_loss_reads_zero_in_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let args = train_args(
        dir.path(),
        &[
            "--set",
            "epochs=2",
            "--set",
            "use_l3=false",
            "--set",
            "encoder_dim=4",
        ],
    );
    let (code, stdout) = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    assert!(stdout.starts_with("trained 8 steps"));
    let metrics = std::fs::read_to_string(dir.path().join("ck.json.metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    for line in metrics.lines() {
        let m: Value = serde_json::from_str(line).unwrap();
        assert_eq!(m["L3"], 0.0);
        assert!(m["L1"].as_f64().unwrap() > 0.0);
        let sum = m["L1"].as_f64().unwrap() + m["L2"].as_f64().unwrap();
        assert_eq!(m["total"].as_f64().unwrap(), sum);
    }
}

#[test]
fn embed_prints_a_vector_of_encoder_width() {
    let ck = fixture_dir().join("tiny_checkpoint.json");
    for (scoring, width) in [("mask", 8), ("concat", 16)] {
        let (code, stdout) = run(&[
            "embed",
            "--checkpoint",
            p(&ck),
            "--head",
            "nizafi",
            "--tail",
            "letevo",
            "--graph",
            p(&synth_bundle_file()),
            "--embeddings",
            p(&synth_file(synth::EMBEDDINGS_FILE)),
            "--scoring",
            scoring,
        ]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(stdout.trim()).unwrap();
        assert_eq!(v["pair"], "nizafi:letevo");
        assert_eq!(v["vector"].as_array().unwrap().len(), width);
    }
}

#[test]
fn inspect_pair_reports_subgraph_or_degenerate() {
    let graph = synth_bundle_file();
    let (code, stdout) = run(&[
        "inspect-pair",
        "--graph",
        p(&graph),
        "--head",
        "nizafi",
        "--tail",
        "letevo",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let nodes = v["nodes"].as_array().unwrap();
    assert!(nodes.len() >= 2);
    let (code, stdout) = run(&[
        "inspect-pair",
        "--graph",
        p(&graph),
        "--head",
        "nizafi",
        "--tail",
        "notaword",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "{\"degenerate\": true}");
}

#[test]
fn gradcheck_exit_codes() {
    let (code, stdout) = run(&["gradcheck", "--seed", "7", "--nodes", "5", "--dim", "8"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["max_rel_error"].as_f64().unwrap() < 1e-4);

    let (code, _) = run(&["gradcheck", "--nodes", "1"]);
    assert_eq!(code, 0);

    let (code, stdout) = run(&["gradcheck", "--tolerance", "1e-30"]);
    assert_eq!(code, 1);
    assert!(stdout.contains("\"pass\":false"));
}

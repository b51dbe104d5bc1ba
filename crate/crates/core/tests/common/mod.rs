#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sememelm::cli::bundle::GraphBundle;
use sememelm::cli::load_embedding_file;
use sememelm::cli::synth::{ANALOGY_FILE, EMBEDDINGS_FILE, LEXICON_FILE, TRIPLES_FILE};
use sememelm::evalkit::{parse_analogy_dataset, AnalogyQuestion};
use sememelm::lexicon::{parse_lexicon, parse_relation_triples};
use sememelm::training::TrainConfig;
use sememelm::SememeKnowledge;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

pub fn synth_dir() -> PathBuf {
    fixture_dir().join("synth_seed1")
}

pub fn synth_bundle() -> GraphBundle {
    let dir = synth_dir();
    let (mut inv, lex) = parse_lexicon(BufReader::new(File::open(dir.join(LEXICON_FILE)).unwrap())).unwrap();
    let triples = parse_relation_triples(
        BufReader::new(File::open(dir.join(TRIPLES_FILE)).unwrap()),
        &mut inv,
    )
    .unwrap();
    GraphBundle::new(inv, lex, &triples).unwrap()
}

/// Graph bundle of the synthetic fixture, written once per test binary.
pub fn synth_bundle_file() -> PathBuf {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("graph.json"), synth_bundle().to_json().unwrap()).unwrap();
        d
    });
    dir.path().join("graph.json")
}

pub fn synth_knowledge(config: &TrainConfig) -> SememeKnowledge {
    let emb = load_embedding_file(&synth_dir().join(EMBEDDINGS_FILE)).unwrap();
    synth_bundle().into_knowledge(emb, config).unwrap()
}

pub fn synth_questions() -> Vec<AnalogyQuestion> {
    parse_analogy_dataset(BufReader::new(
        File::open(synth_dir().join(ANALOGY_FILE)).unwrap(),
    ))
    .unwrap()
}

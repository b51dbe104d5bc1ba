//! Load the committed tiny checkpoint and answer the synthetic analogy set
//! with each scoring mode.

use std::path::Path;

use sememelm::cli::{bundle::GraphBundle, load_checkpoint, load_embedding_file};
use sememelm::evalkit::{self, ModelEncoder};
use sememelm::lexicon::{parse_lexicon, parse_relation_triples};
use sememelm::training::ScoringMode;

fn main() -> sememelm::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let synth = root.join("synth_seed1");
    let checkpoint = load_checkpoint(&root.join("tiny_checkpoint.json"))?;

    let read = |name: &str| std::fs::read_to_string(synth.join(name)).map_err(sememelm::Error::Read);
    let (mut inventory, lexicon) = parse_lexicon(read("lexicon.jsonl")?.as_bytes())?;
    let triples = parse_relation_triples(read("triples.tsv")?.as_bytes(), &mut inventory)?;
    let bundle = GraphBundle::new(inventory, lexicon, &triples)?;
    let knowledge = bundle.into_knowledge(
        load_embedding_file(&synth.join("sememes.vec"))?,
        &checkpoint.config,
    )?;
    let questions = evalkit::parse_analogy_dataset(read("analogy.jsonl")?.as_bytes())?;

    for scoring in [ScoringMode::Mask, ScoringMode::Graph, ScoringMode::Concat] {
        let encoder = ModelEncoder {
            model: &checkpoint.model,
            knowledge: Some(&knowledge),
            scoring,
        };
        let report = evalkit::evaluate(&encoder, "synth", &questions)?;
        println!(
            "{:<7} accuracy {:.3} over {} questions",
            scoring.to_string(),
            report.accuracy,
            report.n
        );
    }
    Ok(())
}

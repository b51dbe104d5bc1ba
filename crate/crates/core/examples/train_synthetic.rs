//! Generate the synthetic world, train on it and score the held-out
//! analogy questions. Pass an epoch count to shorten the run.

use std::path::Path;

use sememelm::cli::synth::{self, SynthOptions};
use sememelm::cli::{self as front, bundle::GraphBundle};
use sememelm::evalkit::{self, ModelEncoder};
use sememelm::lexicon::{parse_lexicon, parse_relation_triples};

fn main() -> sememelm::Result<()> {
    let epochs: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let opts = SynthOptions::default();
    let fixture = synth::generate(&opts)?;
    let dir = std::env::temp_dir().join(format!("sememelm-synth-{}", std::process::id()));
    fixture.write_to(&dir)?;

    let (mut inventory, lexicon) = parse_lexicon(fixture.file(synth::LEXICON_FILE).unwrap().as_bytes())?;
    let triples = parse_relation_triples(
        fixture.file(synth::TRIPLES_FILE).unwrap().as_bytes(),
        &mut inventory,
    )?;
    let bundle = GraphBundle::new(inventory, lexicon, &triples)?;
    let graph_path = dir.join("graph.json");
    std::fs::write(&graph_path, bundle.to_json()?).map_err(sememelm::Error::Read)?;

    let mut config = synth::fixture_config(&opts);
    if let Some(e) = epochs {
        config.epochs = e;
    }
    let file = |name: &str| dir.join(name);
    let (checkpoint, report) = front::train_from_files(
        &graph_path,
        &file(synth::RELATIONS_FILE),
        &file(synth::EMBEDDINGS_FILE),
        &config,
    )?;
    for m in report.metrics.iter().step_by((report.metrics.len() / 10).max(1)) {
        println!(
            "epoch {:>3}  total {:>9.3}  val {:?}",
            m.epoch, m.total, m.val_acc
        );
    }

    let knowledge = front::load_bundle(&graph_path)?.into_knowledge(
        front::load_embedding_file(&file(synth::EMBEDDINGS_FILE))?,
        &config,
    )?;
    let questions = evalkit::parse_analogy_dataset(std::io::BufReader::new(
        std::fs::File::open(file(synth::ANALOGY_FILE)).map_err(sememelm::Error::Read)?,
    ))?;
    let encoder = ModelEncoder {
        model: &checkpoint.model,
        knowledge: Some(&knowledge),
        scoring: config.scoring,
    };
    let result = evalkit::evaluate(&encoder, "synth", &questions)?;
    println!(
        "{} steps, analogy accuracy {:.3}",
        report.steps(),
        result.accuracy
    );
    cleanup(&dir);
    Ok(())
}

fn cleanup(dir: &Path) {
    let _ = std::fs::remove_dir_all(dir);
}

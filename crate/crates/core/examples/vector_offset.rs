//! The word-embedding baseline: a pair is represented by `tail − head`.
//! Pass an embedding text file and an analogy JSONL file to run on real data.

use sememelm::cli::load_embedding_file;
use sememelm::evalkit::{self, AnalogyQuestion};
use sememelm::lexicon::load_embeddings;
use sememelm::WordPair;

const TOY: &str = "man 1 0 0\nwoman 1 1 0\nking 3 0 1\nqueen 3 1 1\nprince 2 0 1\ncar 0 0 5\nwheel 4 4 0\n";

fn main() -> sememelm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (table, questions) = if let [emb, data] = args.as_slice() {
        let file = std::fs::File::open(data).map_err(sememelm::Error::Read)?;
        (
            load_embedding_file(std::path::Path::new(emb))?,
            evalkit::parse_analogy_dataset(std::io::BufReader::new(file))?,
        )
    } else {
        let q = AnalogyQuestion::new(
            WordPair::new("man", "woman"),
            vec![
                WordPair::new("king", "prince"),
                WordPair::new("king", "queen"),
                WordPair::new("car", "wheel"),
            ],
            1,
        )?;
        (load_embeddings(TOY.as_bytes())?, vec![q])
    };
    let report = evalkit::vector_offset_baseline(&table, "offset", &questions)?;
    println!(
        "accuracy {:.3}, coverage {:.3}, n {}",
        report.accuracy, report.coverage, report.n
    );
    Ok(())
}

//! Tokenize the relation prompt for a pair and encode it with a fresh model.

use sememelm::textenc::{render_template, Vocabulary};
use sememelm::training::TrainConfig;
use sememelm::{RelationModel, WordPair};

fn main() -> sememelm::Result<()> {
    let pair = WordPair::new("bee", "honey");
    println!("{}", render_template(&pair.head, &pair.tail)?);

    let config = TrainConfig {
        encoder_dim: 8,
        graph_dim: 8,
        ..TrainConfig::default()
    };
    let model = RelationModel::init(
        config.model_config(),
        Vocabulary::build(["bee", "honey", "hen", "egg"]),
        1,
    )?;
    let (prompt, ids) = model.prompt(&pair)?;
    println!("tokens {:?}", prompt.tokens);
    println!("ids    {ids:?}, mask at {}", prompt.mask_index);
    for p in [pair, WordPair::new("hen", "egg")] {
        let v = model.encode_plain(&p)?;
        println!(
            "{p}: {:?}",
            v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}

//! End-to-end gradient check: a random small sememe graph, a tiny model and
//! the full training loss with every component enabled.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, GradCheckReport};
use crate::error::{Error, Result};
use crate::lexicon::{EmbeddingTable, Lexicon, RelationTriple, SememeId, SememeInventory, WordEntry};
use crate::model::{PreparedPair, RelationModel, SememeKnowledge, WordPair};
use crate::relgraph::build_graph;
use crate::textenc::Vocabulary;
use crate::training::{batch_loss, TrainConfig};

/// Largest graph the check is meant for; finite differences get slow beyond.
pub const MAX_NODES: usize = 6;

pub struct GradCheckFixture {
    pub config: TrainConfig,
    pub model: RelationModel,
    pub knowledge: SememeKnowledge,
    pub positives: Vec<PreparedPair>,
    pub negatives: Vec<PreparedPair>,
}

pub fn fixture(seed: u64, nodes: usize, dim: usize) -> Result<GradCheckFixture> {
    if nodes == 0 || nodes > MAX_NODES {
        return Err(Error::Config(format!(
            "nodes must lie in 1..={MAX_NODES}, got {nodes}"
        )));
    }
    if dim == 0 {
        return Err(Error::Config("dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inventory = SememeInventory::new();
    let ids: Vec<SememeId> = (0..nodes)
        .map(|i| inventory.intern_sememe(&format!("s{i}")))
        .collect();
    let types = [inventory.intern_relation("r0"), inventory.intern_relation("r1")];
    let mut triples = Vec::new();
    for &h in &ids {
        for &t in &ids {
            if h != t && rng.random_bool(0.4) {
                triples.push(RelationTriple {
                    head: h,
                    relation: *types.choose(&mut rng).unwrap(),
                    tail: t,
                });
            }
        }
    }
    let graph = build_graph(&inventory, &triples)?;

    let words = ["wa", "wb", "wc", "wd", "we", "wf"];
    let mut lexicon = Lexicon::new();
    for w in words {
        let mut set: BTreeSet<SememeId> = ids.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        if set.is_empty() {
            set.insert(*ids.choose(&mut rng).unwrap());
        }
        lexicon.insert(WordEntry {
            word: w.to_string(),
            senses: vec![set],
        })?;
    }
    let mut embeddings = EmbeddingTable::new(dim)?;
    for label in inventory.sememe_labels() {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        embeddings.insert(label, &v)?;
    }

    let config = TrainConfig {
        seed,
        encoder_dim: dim,
        graph_dim: dim,
        max_len: 16,
        ..TrainConfig::default()
    };
    let model = RelationModel::init(config.model_config(), Vocabulary::build(words), seed)?;
    let knowledge = SememeKnowledge {
        inventory,
        lexicon,
        graph,
        embeddings,
        mode: config.sememe_mode,
        hops: config.hops,
        impute_seed: seed,
    };
    let prep = |h: &str, t: &str| PreparedPair::new(&model, Some(&knowledge), &WordPair::new(h, t));
    let positives = vec![prep("wa", "wb")?, prep("wc", "wd")?];
    let negatives = vec![prep("we", "wf")?];
    Ok(GradCheckFixture {
        config,
        model,
        knowledge,
        positives,
        negatives,
    })
}

/// Maximum relative error between tape gradients and central differences
/// of the total loss over every model parameter.
pub fn run(seed: u64, nodes: usize, dim: usize, eps: f64) -> Result<GradCheckReport> {
    let fx = fixture(seed, nodes, dim)?;
    let batch = vec![(fx.positives.iter().collect(), fx.negatives.iter().collect())];
    grad_check(&fx.model.store, eps, |tape, store| {
        // `store` is the perturbed copy; only the values differ.
        let mut m = fx.model.clone();
        m.store = store.clone();
        Ok(batch_loss(tape, &m, &batch, &fx.config)?.total)
    })
}

//! The full relation model: text encoder, graph encoder and the two
//! projections, plus the sememe knowledge the graph path reads from.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::gat::{self, GatConfig, GatParams};
use crate::lexicon::{EmbeddingTable, Lexicon, SememeId, SememeInventory, SememeMode};
use crate::relgraph::{PairSubgraph, SememeGraph};
use crate::textenc::{self, EncoderParams, TokenizedPrompt, Vocabulary};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordPair {
    pub head: String,
    pub tail: String,
}

impl WordPair {
    pub fn new(head: impl Into<String>, tail: impl Into<String>) -> Self {
        Self {
            head: head.into(),
            tail: tail.into(),
        }
    }
}

impl std::fmt::Display for WordPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.head, self.tail)
    }
}

/// Architecture hyperparameters that a checkpoint must reproduce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub graph_dim: usize,
    pub encoder_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub leaky_slope: f64,
    pub max_len: usize,
}

impl ModelConfig {
    fn gat(&self) -> GatConfig {
        GatConfig {
            graph_dim: self.graph_dim,
            encoder_dim: self.encoder_dim,
            layers: self.layers,
            heads: self.heads,
            leaky_slope: self.leaky_slope,
        }
    }
}

/// Every trainable parameter plus the token vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub gat: GatParams,
    pub encoder: EncoderParams,
    /// Maps graph-width sememe states to encoder width for word alignment.
    pub word_projection: ParamId,
}

impl RelationModel {
    /// Fresh model; all randomness comes from `seed`.
    pub fn init(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = EncoderParams::init(
            &mut store,
            vocab.len(),
            config.max_len,
            config.encoder_dim,
            &mut rng,
        )?;
        let gat = GatParams::init(&mut store, config.gat(), &mut rng)?;
        let bound = (6.0 / (config.encoder_dim + config.graph_dim) as f64).sqrt();
        let data = (0..config.encoder_dim * config.graph_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let word_projection = store.add(
            "proj.word",
            Matrix::from_vec(config.encoder_dim, config.graph_dim, data)?,
        );
        Ok(Self {
            config,
            vocab,
            store,
            gat,
            encoder,
            word_projection,
        })
    }

    /// Rebuilds handles over an existing parameter store.
    pub fn from_parts(config: ModelConfig, vocab: Vocabulary, store: ParamStore) -> Result<Self> {
        let encoder = EncoderParams::bind(&store)?;
        let gat = GatParams::bind(&store, config.gat())?;
        let word_projection = store
            .find("proj.word")
            .ok_or_else(|| Error::Checkpoint("missing parameter proj.word".into()))?;
        let model = Self {
            config,
            vocab,
            store,
            gat,
            encoder,
            word_projection,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let mut expect = vec![
            (self.encoder.token_embeddings, (self.vocab.len(), c.encoder_dim)),
            (self.encoder.position_embeddings, (c.max_len, c.encoder_dim)),
            (self.encoder.mixer_in, (c.encoder_dim, c.encoder_dim)),
            (self.encoder.mixer_in_bias, (1, c.encoder_dim)),
            (self.encoder.mixer_out, (c.encoder_dim, c.encoder_dim)),
            (self.encoder.mixer_out_bias, (1, c.encoder_dim)),
            (self.gat.virtual_seed, (1, c.graph_dim)),
            (self.gat.projection, (c.encoder_dim, c.graph_dim)),
            (self.word_projection, (c.encoder_dim, c.graph_dim)),
        ];
        for heads in &self.gat.layers {
            for h in heads {
                for id in [h.value, h.query, h.key] {
                    expect.push((id, (c.graph_dim, c.graph_dim)));
                }
            }
        }
        for (id, shape) in expect {
            if self.store.get(id).shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, expected {shape:?}",
                    self.store.name(id),
                    self.store.get(id).shape()
                )));
            }
        }
        Ok(())
    }

    pub fn prompt(&self, pair: &WordPair) -> Result<(TokenizedPrompt, Vec<usize>)> {
        let prompt = textenc::tokenize_pair(&pair.head, &pair.tail, self.config.max_len)?;
        let ids = self.vocab.ids(&prompt);
        Ok((prompt, ids))
    }

    /// Encoder-only forward pass: `h_m`, the representation at the mask.
    pub fn encode_plain(&self, pair: &WordPair) -> Result<Vec<f64>> {
        let (prompt, ids) = self.prompt(pair)?;
        let mut tape = Tape::new();
        let out = textenc::encode(&mut tape, &self.store, &self.encoder, &prompt, &ids)?;
        Ok(tape.value(out.mask).as_slice().to_vec())
    }

    /// `h_g'` for a pair with a prepared subgraph.
    pub fn encode_graph(&self, graph: &PreparedGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let enc = gat::encode_pair(&mut tape, &self.store, &self.gat, &graph.subgraph, &graph.initial)?;
        let projected = gat::project(&mut tape, &self.store, &self.gat, enc.relation)?;
        Ok(tape.value(projected).as_slice().to_vec())
    }

    /// Records the full forward pass of one prepared pair on `tape`.
    pub fn forward(&self, tape: &mut Tape, pair: &PreparedPair, with_graph: bool) -> Result<PairForward> {
        let text = textenc::encode(tape, &self.store, &self.encoder, &pair.prompt, &pair.token_ids)?;
        let graph = match (&pair.graph, with_graph) {
            (Some(g), true) => {
                let enc = gat::encode_pair(tape, &self.store, &self.gat, &g.subgraph, &g.initial)?;
                let projected = gat::project(tape, &self.store, &self.gat, enc.relation)?;
                let head_rows = tape.select_rows(enc.sememes, &g.subgraph.head_members)?;
                let tail_rows = tape.select_rows(enc.sememes, &g.subgraph.tail_members)?;
                Some(GraphForward {
                    relation: enc.relation,
                    projected,
                    head_sememes: head_rows,
                    tail_sememes: tail_rows,
                })
            }
            _ => None,
        };
        Ok(PairForward {
            mask: text.mask,
            head: text.head,
            tail: text.tail,
            graph,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GraphForward {
    /// `h_g`, graph width.
    pub relation: Var,
    /// `h_g'`, encoder width.
    pub projected: Var,
    pub head_sememes: Var,
    pub tail_sememes: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct PairForward {
    pub mask: Var,
    pub head: Var,
    pub tail: Var,
    /// `None` on the encoder-only path.
    pub graph: Option<GraphForward>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreparedGraph {
    pub subgraph: PairSubgraph,
    pub initial: Matrix,
}

/// Everything about a pair that does not depend on parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedPair {
    pub pair: WordPair,
    pub prompt: TokenizedPrompt,
    pub token_ids: Vec<usize>,
    pub graph: Option<PreparedGraph>,
}

impl PreparedPair {
    pub fn new(model: &RelationModel, knowledge: Option<&SememeKnowledge>, pair: &WordPair) -> Result<Self> {
        let (prompt, token_ids) = model.prompt(pair)?;
        let graph = match knowledge {
            Some(k) => k.prepare_graph(pair)?,
            None => None,
        };
        Ok(Self {
            pair: pair.clone(),
            prompt,
            token_ids,
            graph,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.graph.is_none()
    }
}

/// Sememe lexicon, relation graph and initial sememe vectors.
#[derive(Clone, Debug)]
pub struct SememeKnowledge {
    pub inventory: SememeInventory,
    pub lexicon: Lexicon,
    pub graph: SememeGraph,
    pub embeddings: EmbeddingTable,
    pub mode: SememeMode,
    pub hops: usize,
    pub impute_seed: u64,
}

impl SememeKnowledge {
    /// Sememe set of a word; empty for unknown words or empty intersections.
    pub fn word_sememes(&self, word: &str) -> BTreeSet<SememeId> {
        self.lexicon
            .get(word)
            .map(|e| e.sememe_set_with(self.mode))
            .unwrap_or_default()
    }

    /// Augmented subgraph for a pair, or `None` on the degenerate path.
    pub fn pair_subgraph(&self, pair: &WordPair) -> Result<Option<PairSubgraph>> {
        let head = self.word_sememes(&pair.head);
        let tail = self.word_sememes(&pair.tail);
        if head.is_empty() || tail.is_empty() {
            return Ok(None);
        }
        let sg = self.graph.extract_subgraph(&head, &tail, self.hops)?;
        Ok(Some(sg.add_virtual_node()?))
    }

    pub fn prepare_graph(&self, pair: &WordPair) -> Result<Option<PreparedGraph>> {
        Ok(self.pair_subgraph(pair)?.map(|subgraph| {
            let initial = gat::initial_states(&subgraph, &self.inventory, &self.embeddings, self.impute_seed);
            PreparedGraph { subgraph, initial }
        }))
    }
}

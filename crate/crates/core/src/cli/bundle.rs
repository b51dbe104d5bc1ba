//! Graph bundle: inventory, lexicon and sememe relation triples in one JSON
//! file, written by `build-graph` and read by the other commands.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{EmbeddingTable, Lexicon, RelationTriple, SememeId, SememeInventory, WordEntry};
use crate::model::SememeKnowledge;
use crate::relgraph::{build_graph, SememeGraph};
use crate::training::TrainConfig;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BundleDocument {
    version: u32,
    sememes: Vec<String>,
    relation_types: Vec<String>,
    /// `(word, senses)` with senses as lists of sememe indices.
    words: Vec<(String, Vec<Vec<usize>>)>,
    /// `(head, relation type, tail)` indices.
    triples: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct GraphBundle {
    pub inventory: SememeInventory,
    pub lexicon: Lexicon,
    pub graph: SememeGraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GraphCounts {
    pub nodes: usize,
    pub edges: usize,
    pub relation_types: usize,
    pub words: usize,
}

impl GraphBundle {
    pub fn new(inventory: SememeInventory, lexicon: Lexicon, triples: &[RelationTriple]) -> Result<Self> {
        let graph = build_graph(&inventory, triples)?;
        Ok(Self {
            inventory,
            lexicon,
            graph,
        })
    }

    /// Nodes are all known sememes; relation types are those used by edges.
    pub fn counts(&self) -> GraphCounts {
        GraphCounts {
            nodes: self.graph.node_count(),
            edges: self.graph.edge_count(),
            relation_types: self.graph.distinct_relation_types(),
            words: self.lexicon.len(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = BundleDocument {
            version: BUNDLE_VERSION,
            sememes: self.inventory.sememe_labels().to_vec(),
            relation_types: self.inventory.relation_labels().to_vec(),
            words: self
                .lexicon
                .entries()
                .iter()
                .map(|e| {
                    let senses = e
                        .senses
                        .iter()
                        .map(|s| s.iter().map(|id| id.0).collect())
                        .collect();
                    (e.word.clone(), senses)
                })
                .collect(),
            triples: self
                .graph
                .edges()
                .iter()
                .map(|t| (t.head.0, t.relation.0, t.tail.0))
                .collect(),
        };
        let mut s = serde_json::to_string(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BundleDocument = serde_json::from_str(text)?;
        if doc.version > BUNDLE_VERSION {
            return Err(Error::Invalid(format!(
                "graph bundle version {} is not supported",
                doc.version
            )));
        }
        let mut inventory = SememeInventory::new();
        for s in &doc.sememes {
            inventory.intern_sememe(s);
        }
        for r in &doc.relation_types {
            inventory.intern_relation(r);
        }
        if inventory.sememe_count() != doc.sememes.len()
            || inventory.relation_count() != doc.relation_types.len()
        {
            return Err(Error::Invalid("graph bundle has duplicate labels".into()));
        }
        let n = doc.sememes.len();
        let mut lexicon = Lexicon::new();
        for (word, senses) in doc.words {
            let mut sets = Vec::with_capacity(senses.len());
            for sense in senses {
                let set: BTreeSet<SememeId> = sense.into_iter().map(SememeId).collect();
                if let Some(bad) = set.iter().find(|s| s.0 >= n) {
                    return Err(Error::IdOutOfRange { id: bad.0, limit: n });
                }
                sets.push(set);
            }
            lexicon.insert(WordEntry { word, senses: sets })?;
        }
        let triples: Vec<RelationTriple> = doc
            .triples
            .into_iter()
            .map(|(h, r, t)| RelationTriple {
                head: SememeId(h),
                relation: crate::lexicon::RelationTypeId(r),
                tail: SememeId(t),
            })
            .collect();
        Self::new(inventory, lexicon, &triples)
    }

    pub fn into_knowledge(self, embeddings: EmbeddingTable, config: &TrainConfig) -> Result<SememeKnowledge> {
        if embeddings.dim() != config.graph_dim {
            return Err(Error::Config(format!(
                "sememe embeddings have dimension {}, graph_dim is {}",
                embeddings.dim(),
                config.graph_dim
            )));
        }
        Ok(SememeKnowledge {
            inventory: self.inventory,
            lexicon: self.lexicon,
            graph: self.graph,
            embeddings,
            mode: config.sememe_mode,
            hops: config.hops,
            impute_seed: config.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{parse_lexicon, parse_relation_triples};

    #[test]
    fn round_trip() {
        let lex = "{\"word\":\"bee\",\"senses\":[[\"insect\",\"animal\"]]}\n{\"word\":\"honey\",\"senses\":[[\"food\"]]}\n";
        let (mut inv, lexicon) = parse_lexicon(lex.as_bytes()).unwrap();
        let triples = parse_relation_triples(
            "insect\tmakes\tfood\nanimal\thypernym\tinsect\n".as_bytes(),
            &mut inv,
        )
        .unwrap();
        let b = GraphBundle::new(inv, lexicon, &triples).unwrap();
        assert_eq!(
            b.counts(),
            GraphCounts {
                nodes: 3,
                edges: 2,
                relation_types: 2,
                words: 2
            }
        );
        let json = b.to_json().unwrap();
        let back = GraphBundle::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!(back.lexicon, b.lexicon);
    }
}

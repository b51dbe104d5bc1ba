//! Relation-similarity data: scored pairs per relation, reduced to the most
//! and least typical pairs and split into train and validation parts.

use std::collections::HashSet;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WordPair;

/// Pairs kept at each end of the typicality ranking.
pub const PAIRS_PER_SIDE: usize = 10;
/// Share of positives and negatives assigned to training.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ScoredPair {
    pub head: String,
    pub tail: String,
    pub score: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RelationRecord {
    pub relation: String,
    pub pairs: Vec<ScoredPair>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationExamples {
    pub relation: String,
    pub train_positives: Vec<WordPair>,
    pub val_positives: Vec<WordPair>,
    pub train_negatives: Vec<WordPair>,
    pub val_negatives: Vec<WordPair>,
}

impl RelationExamples {
    pub fn positives(&self) -> impl Iterator<Item = &WordPair> {
        self.train_positives.iter().chain(&self.val_positives)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &WordPair> {
        self.train_negatives.iter().chain(&self.val_negatives)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationDataset {
    pub relations: Vec<RelationExamples>,
}

impl RelationDataset {
    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    /// Every distinct word in the data, in first-seen order.
    pub fn words(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.relations {
            for p in r.positives().chain(r.negatives()) {
                for w in [p.head.as_str(), p.tail.as_str()] {
                    if seen.insert(w) {
                        out.push(w);
                    }
                }
            }
        }
        out
    }
}

/// Reads relation JSONL and splits each relation with a shuffle seeded by
/// `seed` and the relation's position.
pub fn load_relation_data<R: BufRead>(reader: R, seed: u64) -> Result<RelationDataset> {
    let mut relations = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RelationRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse("relations", i + 1, e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(relations.len() as u64));
        relations.push(select_and_split(record, &mut rng)?);
    }
    Ok(RelationDataset { relations })
}

fn select_and_split(record: RelationRecord, rng: &mut ChaCha8Rng) -> Result<RelationExamples> {
    let name = record.relation;
    let n = record.pairs.len();
    let mut seen = HashSet::new();
    for p in &record.pairs {
        if !seen.insert((p.head.as_str(), p.tail.as_str())) {
            return Err(Error::Invalid(format!(
                "relation {name:?}: duplicate pair {}:{}",
                p.head, p.tail
            )));
        }
        if !p.score.is_finite() {
            return Err(Error::Invalid(format!("relation {name:?}: non-finite score")));
        }
    }
    // Disjoint top/bottom selection needs at least two pairs per side.
    let per_side = PAIRS_PER_SIDE.min(n / 2);
    if per_side < 2 {
        return Err(Error::Invalid(format!(
            "relation {name:?}: {n} scored pairs, need at least 4"
        )));
    }
    let mut ranked = record.pairs;
    // Stable: ties keep input order.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let to_pair = |p: &ScoredPair| WordPair::new(p.head.clone(), p.tail.clone());
    let mut positives: Vec<WordPair> = ranked[..per_side].iter().map(to_pair).collect();
    let mut negatives: Vec<WordPair> = ranked[n - per_side..].iter().map(to_pair).collect();

    positives.shuffle(rng);
    negatives.shuffle(rng);
    let cut = |len: usize| ((len as f64) * TRAIN_FRACTION).round() as usize;
    let val_positives = positives.split_off(cut(positives.len()));
    let val_negatives = negatives.split_off(cut(negatives.len()));
    Ok(RelationExamples {
        relation: name,
        train_positives: positives,
        val_positives,
        train_negatives: negatives,
        val_negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(name: &str, n: usize) -> String {
        let pairs: Vec<_> = (0..n)
            .map(|i| ScoredPair {
                head: format!("h{i}"),
                tail: format!("t{i}"),
                score: (n - i) as f64,
            })
            .collect();
        serde_json::to_string(&RelationRecord {
            relation: name.into(),
            pairs,
        })
        .unwrap()
    }

    #[test]
    fn top_and_bottom_ten_with_split() {
        let data = load_relation_data(record("r", 25).as_bytes(), 3).unwrap();
        let r = &data.relations[0];
        assert_eq!(r.train_positives.len() + r.val_positives.len(), 10);
        assert_eq!(r.train_negatives.len() + r.val_negatives.len(), 10);
        assert_eq!(r.train_positives.len(), 8);
        assert_eq!(r.val_positives.len(), 2);
        // scores descend with index: positives are h0..h9, negatives h15..h24
        assert!(r.positives().all(|p| p.head[1..].parse::<usize>().unwrap() < 10));
        assert!(r.negatives().all(|p| p.head[1..].parse::<usize>().unwrap() >= 15));
    }

    #[test]
    fn split_is_seeded() {
        let a = load_relation_data(record("r", 25).as_bytes(), 3).unwrap();
        let b = load_relation_data(record("r", 25).as_bytes(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_relations_shrink_symmetrically() {
        let data = load_relation_data(record("r", 9).as_bytes(), 0).unwrap();
        let r = &data.relations[0];
        assert_eq!(r.positives().count(), 4);
        assert_eq!(r.negatives().count(), 4);
    }

    #[test]
    fn too_few_pairs_names_relation() {
        let err = load_relation_data(record("lonely", 1).as_bytes(), 0).unwrap_err();
        assert!(err.to_string().contains("lonely"), "{err}");
    }

    #[test]
    fn duplicate_pair_rejected() {
        let line = r#"{"relation":"r","pairs":[{"head":"a","tail":"b","score":1},{"head":"a","tail":"b","score":2},{"head":"c","tail":"d","score":0},{"head":"e","tail":"f","score":0}]}"#;
        assert!(load_relation_data(line.as_bytes(), 0).is_err());
    }
}

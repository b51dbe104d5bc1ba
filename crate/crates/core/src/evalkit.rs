//! Analogy benchmarks answered by candidate ranking.
//!
//! Every pair is mapped to a relation vector; the candidate whose vector is
//! most cosine-similar to the stem's wins, ties going to the lowest index.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::EmbeddingTable;
use crate::model::{RelationModel, SememeKnowledge, WordPair};
use crate::training::ScoringMode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub stem: WordPair,
    pub choices: Vec<WordPair>,
    pub answer: usize,
}

#[derive(Deserialize, Serialize)]
struct RawQuestion {
    stem: (String, String),
    choice: Vec<(String, String)>,
    answer: usize,
}

impl AnalogyQuestion {
    pub fn new(stem: WordPair, choices: Vec<WordPair>, answer: usize) -> Result<Self> {
        if choices.len() < 2 {
            return Err(Error::Invalid(format!(
                "question {stem} has {} choices, need 2",
                choices.len()
            )));
        }
        if answer >= choices.len() {
            return Err(Error::Invalid(format!(
                "question {stem}: answer {answer} out of range for {} choices",
                choices.len()
            )));
        }
        Ok(Self {
            stem,
            choices,
            answer,
        })
    }

    /// One line of the dataset format.
    pub fn to_json_line(&self) -> String {
        let raw = RawQuestion {
            stem: (self.stem.head.clone(), self.stem.tail.clone()),
            choice: self
                .choices
                .iter()
                .map(|c| (c.head.clone(), c.tail.clone()))
                .collect(),
            answer: self.answer,
        };
        serde_json::to_string(&raw).expect("question serialises")
    }
}

/// Reads `{"stem":[h,t],"choice":[[h,t],...],"answer":i}` lines in order.
pub fn parse_analogy_dataset<R: BufRead>(reader: R) -> Result<Vec<AnalogyQuestion>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion =
            serde_json::from_str(&line).map_err(|e| Error::parse("analogy", i + 1, e.to_string()))?;
        let q = AnalogyQuestion::new(
            WordPair::new(raw.stem.0, raw.stem.1),
            raw.choice.into_iter().map(|(h, t)| WordPair::new(h, t)).collect(),
            raw.answer,
        )
        .map_err(|e| Error::parse("analogy", i + 1, e.to_string()))?;
        out.push(q);
    }
    Ok(out)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Index of the first maximal score.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps a word pair to a relation vector. `None` marks a pair
/// the encoder cannot represent; such choices are never picked.
pub trait PairEncoder: Sync {
    fn represent(&self, pair: &WordPair) -> Result<Option<Vec<f64>>>;
}

/// Relation vector of the trained model.
///
/// On the degenerate path (no sememes for either word, or no knowledge
/// loaded) this is exactly the plain encoder output.
pub fn relation_representation(
    model: &RelationModel,
    knowledge: Option<&SememeKnowledge>,
    pair: &WordPair,
    scoring: ScoringMode,
) -> Result<Vec<f64>> {
    let mask = model.encode_plain(pair)?;
    if scoring == ScoringMode::Mask {
        return Ok(mask);
    }
    let graph = match knowledge {
        Some(k) => k.prepare_graph(pair)?,
        None => None,
    };
    Ok(match (scoring, graph) {
        (ScoringMode::Graph, Some(g)) => model.encode_graph(&g)?,
        (ScoringMode::Concat, Some(g)) => {
            let mut v = mask;
            v.extend(model.encode_graph(&g)?);
            v
        }
        (ScoringMode::Concat, None) => {
            let mut v = mask;
            v.resize(2 * model.config.encoder_dim, 0.0);
            v
        }
        _ => mask,
    })
}

pub struct ModelEncoder<'a> {
    pub model: &'a RelationModel,
    pub knowledge: Option<&'a SememeKnowledge>,
    pub scoring: ScoringMode,
}

impl PairEncoder for ModelEncoder<'_> {
    fn represent(&self, pair: &WordPair) -> Result<Option<Vec<f64>>> {
        relation_representation(self.model, self.knowledge, pair, self.scoring).map(Some)
    }
}

/// `embed(tail) − embed(head)`; `None` if either word lacks a vector.
pub struct OffsetEncoder<'a> {
    pub embeddings: &'a EmbeddingTable,
}

impl OffsetEncoder<'_> {
    fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.embeddings
            .get(word)
            .or_else(|| self.embeddings.get_folded(word))
    }
}

impl PairEncoder for OffsetEncoder<'_> {
    fn represent(&self, pair: &WordPair) -> Result<Option<Vec<f64>>> {
        let (Some(h), Some(t)) = (self.lookup(&pair.head), self.lookup(&pair.tail)) else {
            return Ok(None);
        };
        Ok(Some(t.iter().zip(h).map(|(t, h)| t - h).collect()))
    }
}

mod scores_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    // Unrepresentable choices score −∞, written as null.
    pub fn serialize<S: Serializer>(scores: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Option<f64>> = scores.iter().map(|&x| x.is_finite().then_some(x)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub chosen: usize,
    pub gold: usize,
    #[serde(with = "scores_serde")]
    pub scores: Vec<f64>,
    /// False when the stem or some choice could not be represented.
    pub covered: bool,
}

impl QuestionResult {
    pub fn is_correct(&self) -> bool {
        self.chosen == self.gold
    }
}

pub fn answer_question(encoder: &dyn PairEncoder, question: &AnalogyQuestion) -> Result<QuestionResult> {
    let stem = encoder.represent(&question.stem)?;
    let mut covered = stem.is_some();
    let mut scores = Vec::with_capacity(question.choices.len());
    for choice in &question.choices {
        let rep = encoder.represent(choice)?;
        covered &= rep.is_some();
        scores.push(match (&stem, rep) {
            (Some(s), Some(c)) => cosine(s, &c),
            _ => f64::NEG_INFINITY,
        });
    }
    Ok(QuestionResult {
        chosen: argmax(&scores),
        gold: question.answer,
        scores,
        covered,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub accuracy: f64,
    pub n: usize,
    /// Share of questions whose pairs were all representable.
    pub coverage: f64,
    pub per_question: Vec<QuestionResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_tsv_line<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}",
            self.dataset, self.n, self.accuracy, self.coverage
        )?;
        Ok(())
    }
}

/// Answers every question (in parallel) and reports accuracy.
pub fn evaluate(
    encoder: &dyn PairEncoder,
    dataset: &str,
    questions: &[AnalogyQuestion],
) -> Result<EvalReport> {
    if questions.is_empty() {
        return Err(Error::Invalid(format!("dataset {dataset:?} has no questions")));
    }
    let per_question: Vec<QuestionResult> = questions
        .par_iter()
        .map(|q| answer_question(encoder, q))
        .collect::<Result<_>>()?;
    let n = per_question.len();
    let correct = per_question.iter().filter(|r| r.is_correct()).count();
    let covered = per_question.iter().filter(|r| r.covered).count();
    Ok(EvalReport {
        dataset: dataset.to_string(),
        accuracy: correct as f64 / n as f64,
        n,
        coverage: covered as f64 / n as f64,
        per_question,
    })
}

/// Classic embedding-offset baseline.
pub fn vector_offset_baseline(
    embeddings: &EmbeddingTable,
    dataset: &str,
    questions: &[AnalogyQuestion],
) -> Result<EvalReport> {
    evaluate(&OffsetEncoder { embeddings }, dataset, questions)
}

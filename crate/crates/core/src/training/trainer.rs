use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::{PreparedPair, RelationModel, SememeKnowledge, WordPair};

use super::losses::{
    combine, contrastive_loss, relation_alignment_loss, total_loss, word_alignment_loss, RelationGroup,
    WordAlignmentInput,
};
use super::{AdamW, RelationDataset, StopGradientSide, TrainConfig};

/// Mixed into the seed for the relation order so it does not share a stream
/// with parameter initialisation.
const ORDER_STREAM: u64 = 0x6261_7463_685f_6f72;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    pub total: f64,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub metrics: Vec<EpochMetrics>,
    /// Total loss of every optimisation step, in order.
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.step_losses.len()
    }
}

/// Loss values of one batch; disabled components read 0.
#[derive(Clone, Copy, Debug)]
pub struct BatchLosses {
    pub total: Var,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub contrastive_terms: usize,
}

/// Positives and negatives of one relation, as prepared pairs.
pub type RelationBatch<'a> = (Vec<&'a PreparedPair>, Vec<&'a PreparedPair>);

/// Records the forward pass and all enabled losses for a batch of relations.
pub fn batch_loss(
    tape: &mut Tape,
    model: &RelationModel,
    batch: &[RelationBatch<'_>],
    config: &TrainConfig,
) -> Result<BatchLosses> {
    let toggles = config.toggles();
    let with_graph = toggles.l1 || toggles.l2;

    let mut groups = Vec::with_capacity(batch.len());
    let mut graph_side = Vec::new();
    let mut encoder_side = Vec::new();
    let mut words = Vec::new();
    let mut seen_words = BTreeSet::new();
    for (positives, negatives) in batch {
        let mut group = RelationGroup {
            positives: Vec::with_capacity(positives.len()),
            negatives: Vec::with_capacity(negatives.len()),
        };
        for (is_positive, pair) in positives
            .iter()
            .map(|p| (true, p))
            .chain(negatives.iter().map(|p| (false, p)))
        {
            let out = model.forward(tape, pair, with_graph)?;
            if is_positive {
                group.positives.push(out.mask);
            } else {
                group.negatives.push(out.mask);
            }
            let Some(g) = out.graph else { continue };
            if toggles.l2 {
                let (gs, es) = match config.stop_gradient_side {
                    StopGradientSide::None => (g.projected, out.mask),
                    StopGradientSide::Graph => (tape.detach(g.projected)?, out.mask),
                    StopGradientSide::Encoder => (g.projected, tape.detach(out.mask)?),
                };
                graph_side.push(gs);
                encoder_side.push(es);
            }
            if toggles.l1 {
                for (word, rep, sememes) in [
                    (&pair.pair.head, out.head, g.head_sememes),
                    (&pair.pair.tail, out.tail, g.tail_sememes),
                ] {
                    if seen_words.insert(word.to_lowercase()) {
                        words.push(WordAlignmentInput { word: rep, sememes });
                    }
                }
            }
        }
        groups.push(group);
    }

    let l1 = if toggles.l1 {
        let projection = tape.param(&model.store, model.word_projection)?;
        Some(word_alignment_loss(tape, &words, projection)?)
    } else {
        None
    };
    let l2 = if toggles.l2 && !graph_side.is_empty() {
        Some(relation_alignment_loss(tape, &graph_side, &encoder_side)?)
    } else {
        None
    };
    let (l3, terms) = if toggles.l3 {
        let out = contrastive_loss(tape, &groups, config.tau, config.denominator_includes_positive)?;
        (Some(out.loss), out.terms)
    } else {
        (None, 0)
    };
    let total = combine(tape, l1, l2, l3, toggles)?;
    let read = |tape: &Tape, v: Option<Var>| v.map_or(0.0, |v| tape.value(v).item());
    Ok(BatchLosses {
        total,
        l1: read(tape, l1),
        l2: read(tape, l2),
        l3: read(tape, l3),
        contrastive_terms: terms,
    })
}

/// Prepares every pair of the dataset once; preparation does not depend on
/// parameters, so it runs in parallel.
fn prepare_all(
    model: &RelationModel,
    knowledge: Option<&SememeKnowledge>,
    data: &RelationDataset,
) -> Result<BTreeMap<WordPair, PreparedPair>> {
    let unique: BTreeSet<&WordPair> = data
        .relations
        .iter()
        .flat_map(|r| r.positives().chain(r.negatives()))
        .collect();
    let prepared: Vec<PreparedPair> = unique
        .into_par_iter()
        .map(|p| PreparedPair::new(model, knowledge, p))
        .collect::<Result<_>>()?;
    Ok(prepared.into_iter().map(|p| (p.pair.clone(), p)).collect())
}

/// Runs the optimisation loop in place and returns per-epoch metrics.
pub fn train(
    model: &mut RelationModel,
    knowledge: Option<&SememeKnowledge>,
    data: &RelationDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("training needs at least one relation".into()));
    }
    for r in &data.relations {
        if r.train_positives.len() < 2 || r.train_negatives.is_empty() {
            return Err(Error::Invalid(format!(
                "relation {:?} needs at least 2 training positives and 1 training negative",
                r.relation
            )));
        }
    }
    let mut report = TrainReport::default();
    if config.epochs == 0 {
        return Ok(report);
    }

    let prepared = prepare_all(model, knowledge, data)?;
    let degenerate = prepared.values().filter(|p| p.is_degenerate()).count();
    log::info!(
        "prepared {} pairs ({} on the degenerate path)",
        prepared.len(),
        degenerate
    );
    let lookup = |pairs: &[WordPair]| -> Vec<&PreparedPair> { pairs.iter().map(|p| &prepared[p]).collect() };

    let mut opt = AdamW::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_eps,
        config.weight_decay,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ORDER_STREAM);
    let mut batch_id = 0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_relations) {
            let batch: Vec<RelationBatch<'_>> = chunk
                .iter()
                .map(|&r| {
                    let rel = &data.relations[r];
                    (lookup(&rel.train_positives), lookup(&rel.train_negatives))
                })
                .collect();
            let diverged = |reason: String| Error::Divergence {
                epoch,
                batch: batch_id,
                reason,
            };
            let mut tape = Tape::new();
            let losses = batch_loss(&mut tape, model, &batch, config).map_err(|e| match e {
                Error::NonFinite { op } => diverged(format!("non-finite value in {op}")),
                other => other,
            })?;
            let total = tape.value(losses.total).item();
            if !total.is_finite() {
                return Err(diverged(format!("loss is {total}")));
            }
            tape.backward(losses.total)?;
            let grads = tape.param_grads(&model.store);
            if grads.iter().any(|(_, g)| g.is_some_and(|g| !g.is_finite())) {
                return Err(diverged("non-finite gradient".into()));
            }
            opt.step(&mut model.store, &grads);
            if model.store.iter().any(|(_, _, m)| !m.is_finite()) {
                return Err(diverged("non-finite parameter after update".into()));
            }

            log::debug!(
                "epoch {epoch} batch {batch_id}: L1 {:.5} L2 {:.5} L3 {:.5} total {total:.5}",
                losses.l1,
                losses.l2,
                losses.l3
            );
            report.step_losses.push(total);
            s1 += losses.l1;
            s2 += losses.l2;
            s3 += losses.l3;
            batches += 1;
            batch_id += 1;
        }
        let n = batches as f64;
        let (l1, l2, l3) = (s1 / n, s2 / n, s3 / n);
        let val_acc = validation_accuracy(model, data, &prepared)?;
        let metrics = EpochMetrics {
            epoch,
            l1,
            l2,
            l3,
            total: total_loss(l1, l2, l3, config.toggles()),
            val_acc,
        };
        log::info!(
            "epoch {epoch}: L1 {:.4} L2 {:.4} L3 {:.4} total {:.4} val_acc {}",
            l1,
            l2,
            l3,
            metrics.total,
            val_acc.map_or("n/a".to_string(), |v| format!("{v:.3}"))
        );
        report.metrics.push(metrics);
    }
    Ok(report)
}

fn mask_vector(model: &RelationModel, pair: &PreparedPair) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, pair, false)?;
    Ok(tape.value(out.mask).as_slice().to_vec())
}

/// Nearest-prototype retrieval: each validation positive should be closest
/// (by cosine) to the mean training positive of its own relation.
fn validation_accuracy(
    model: &RelationModel,
    data: &RelationDataset,
    prepared: &BTreeMap<WordPair, PreparedPair>,
) -> Result<Option<f64>> {
    let mut prototypes = Vec::with_capacity(data.len());
    for r in &data.relations {
        let mut sum = vec![0.0; model.config.encoder_dim];
        for p in &r.train_positives {
            for (s, v) in sum.iter_mut().zip(mask_vector(model, &prepared[p])?) {
                *s += v;
            }
        }
        let n = r.train_positives.len() as f64;
        prototypes.push(sum.into_iter().map(|s| s / n).collect::<Vec<_>>());
    }
    let (mut correct, mut total) = (0usize, 0usize);
    for (ri, r) in data.relations.iter().enumerate() {
        for p in &r.val_positives {
            let v = mask_vector(model, &prepared[p])?;
            let scores: Vec<f64> = prototypes
                .iter()
                .map(|proto| crate::evalkit::cosine(&v, proto))
                .collect();
            if crate::evalkit::argmax(&scores) == ri {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok((total > 0).then(|| correct as f64 / total as f64))
}

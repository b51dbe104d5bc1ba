//! Word alignment, relation alignment and supervised contrastive losses.

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

use super::LossToggles;

/// One word's encoder representation together with the graph states of its
/// sememes.
#[derive(Clone, Copy, Debug)]
pub struct WordAlignmentInput {
    /// `1 × D` word representation from the encoder.
    pub word: Var,
    /// `k × d` final states of the word's sememe nodes, `k ≥ 1`.
    pub sememes: Var,
}

/// `Σ_w ‖h_w − P · mean(h_s)‖₂` with `projection` the `D × d` matrix `P`.
///
/// An empty word list yields a zero constant.
pub fn word_alignment_loss(tape: &mut Tape, words: &[WordAlignmentInput], projection: Var) -> Result<Var> {
    if words.is_empty() {
        return tape.constant(Matrix::scalar(0.0));
    }
    let pt = tape.transpose(projection)?;
    let mut diffs = Vec::with_capacity(words.len());
    for w in words {
        let mean = tape.mean_rows(w.sememes)?;
        let projected = tape.matmul(mean, pt)?;
        diffs.push(tape.sub(w.word, projected)?);
    }
    let stacked = tape.concat_rows(&diffs)?;
    let norms = tape.l2_norm_rows(stacked)?;
    tape.sum_all(norms)
}

/// Mean over batch and coordinates of `(h_g' − h_m)²`.
pub fn relation_alignment_loss(tape: &mut Tape, graph_side: &[Var], encoder_side: &[Var]) -> Result<Var> {
    if graph_side.is_empty() {
        return Err(Error::Invalid(
            "relation alignment needs a non-empty batch".into(),
        ));
    }
    if graph_side.len() != encoder_side.len() {
        return Err(Error::shape(
            "relation_alignment_loss",
            format!(
                "{} graph vs {} encoder vectors",
                graph_side.len(),
                encoder_side.len()
            ),
        ));
    }
    let g = tape.concat_rows(graph_side)?;
    let m = tape.concat_rows(encoder_side)?;
    tape.squared_error_mean(g, m)
}

/// Relation representations for one relation: anchors/positives are drawn
/// from `positives`, every member of `negatives` enters the denominator.
#[derive(Clone, Debug)]
pub struct RelationGroup {
    pub positives: Vec<Var>,
    pub negatives: Vec<Var>,
}

#[derive(Clone, Copy, Debug)]
pub struct ContrastiveOutput {
    pub loss: Var,
    /// Number of ordered `(anchor, positive)` terms summed.
    pub terms: usize,
}

/// Supervised contrastive loss over ordered anchor/positive pairs with
/// `a ≠ p`:
///
/// `Σ_r Σ_(a,p) −log( exp(x_a·x_p/τ) / Σ_n exp(x_a·x_n/τ) )`
///
/// By default the denominator runs over negatives only, so the value can be
/// negative. `include_positive` adds the positive term to the denominator.
pub fn contrastive_loss(
    tape: &mut Tape,
    groups: &[RelationGroup],
    tau: f64,
    include_positive: bool,
) -> Result<ContrastiveOutput> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Invalid(format!("temperature must be positive, got {tau}")));
    }
    let mut total: Option<Var> = None;
    let mut terms = 0;
    for (r, group) in groups.iter().enumerate() {
        if group.positives.len() < 2 {
            return Err(Error::Invalid(format!(
                "relation group {r} has fewer than 2 positives"
            )));
        }
        if group.negatives.is_empty() {
            return Err(Error::Invalid(format!("relation group {r} has no negatives")));
        }
        let p = group.positives.len();
        let (anchors, partners): (Vec<usize>, Vec<usize>) = (0..p)
            .flat_map(|a| (0..p).filter(move |&q| q != a).map(move |q| (a, q)))
            .unzip();
        terms += anchors.len();

        let pos = tape.concat_rows(&group.positives)?;
        let neg = tape.concat_rows(&group.negatives)?;
        let a = tape.select_rows(pos, &anchors)?;
        let q = tape.select_rows(pos, &partners)?;
        let prod = tape.mul(a, q)?;
        let pos_sim = tape.row_sums(prod)?;
        let pos_logit = tape.scale(pos_sim, 1.0 / tau)?;

        let neg_t = tape.transpose(neg)?;
        let neg_sim = tape.matmul(pos, neg_t)?;
        let neg_logit = tape.scale(neg_sim, 1.0 / tau)?;
        let neg_logit = tape.select_rows(neg_logit, &anchors)?;

        let denom_in = if include_positive {
            tape.concat_cols(&[pos_logit, neg_logit])?
        } else {
            neg_logit
        };
        let log_denom = tape.log_sum_exp_rows(denom_in)?;
        let per_term = tape.sub(log_denom, pos_logit)?;
        let loss = tape.sum_all(per_term)?;
        total = Some(match total {
            Some(t) => tape.add(t, loss)?,
            None => loss,
        });
    }
    let loss = match total {
        Some(t) => t,
        None => tape.constant(Matrix::scalar(0.0))?,
    };
    Ok(ContrastiveOutput { loss, terms })
}

/// Sum of the enabled components, accumulated as `(L1 + L2) + L3`.
pub fn total_loss(l1: f64, l2: f64, l3: f64, toggles: LossToggles) -> f64 {
    let pick = |on: bool, v: f64| if on { v } else { 0.0 };
    pick(toggles.l1, l1) + pick(toggles.l2, l2) + pick(toggles.l3, l3)
}

/// Tape form of [`total_loss`]; disabled or absent parts contribute zero.
pub fn combine(
    tape: &mut Tape,
    l1: Option<Var>,
    l2: Option<Var>,
    l3: Option<Var>,
    toggles: LossToggles,
) -> Result<Var> {
    let zero = tape.constant(Matrix::scalar(0.0))?;
    let pick = |on: bool, v: Option<Var>| if on { v.unwrap_or(zero) } else { zero };
    let (a, b, c) = (pick(toggles.l1, l1), pick(toggles.l2, l2), pick(toggles.l3, l3));
    let ab = tape.add(a, b)?;
    tape.add(ab, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: &mut Tape, v: &[f64]) -> Var {
        t.leaf(Matrix::row_vector(v.to_vec())).unwrap()
    }

    #[test]
    fn word_alignment_zero_when_matching() {
        let mut t = Tape::new();
        let p = t.constant(Matrix::identity(2)).unwrap();
        let s = t
            .constant(Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        let w = row(&mut t, &[2.0, 3.0]);
        let l = word_alignment_loss(&mut t, &[WordAlignmentInput { word: w, sememes: s }], p).unwrap();
        assert_eq!(t.value(l).item(), 0.0);
    }

    #[test]
    fn word_alignment_345() {
        let mut t = Tape::new();
        let p = t.constant(Matrix::identity(2)).unwrap();
        let s = t.constant(Matrix::row_vector(vec![3.0, 4.0])).unwrap();
        let w = row(&mut t, &[0.0, 0.0]);
        let l = word_alignment_loss(&mut t, &[WordAlignmentInput { word: w, sememes: s }], p).unwrap();
        assert!((t.value(l).item() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn word_alignment_sums_words() {
        // P = [[2,0],[0,1]]
        // word 1: (1,1) vs P·mean{(0,1),(1,1)} = P·(0.5,1) = (1,1) → 0
        // word 2: (0,0) vs P·(1,2) = (2,2)                         → √8
        let mut t = Tape::new();
        let p = t
            .constant(Matrix::from_vec(2, 2, vec![2.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        let s1 = t
            .constant(Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap())
            .unwrap();
        let s2 = t.constant(Matrix::row_vector(vec![1.0, 2.0])).unwrap();
        let w1 = row(&mut t, &[1.0, 1.0]);
        let w2 = row(&mut t, &[0.0, 0.0]);
        let l = word_alignment_loss(
            &mut t,
            &[
                WordAlignmentInput {
                    word: w1,
                    sememes: s1,
                },
                WordAlignmentInput {
                    word: w2,
                    sememes: s2,
                },
            ],
            p,
        )
        .unwrap();
        assert!((t.value(l).item() - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn relation_alignment_values() {
        let mut t = Tape::new();
        let a = row(&mut t, &[1.0, 2.0]);
        let b = row(&mut t, &[1.0, 2.0]);
        let l = relation_alignment_loss(&mut t, &[a], &[b]).unwrap();
        assert_eq!(t.value(l).item(), 0.0);

        let c = row(&mut t, &[0.0, 0.0]);
        let d = row(&mut t, &[0.0, 2.0]);
        let l = relation_alignment_loss(&mut t, &[c], &[d]).unwrap();
        assert_eq!(t.value(l).item(), 2.0);

        assert!(relation_alignment_loss(&mut t, &[], &[]).is_err());
        assert!(relation_alignment_loss(&mut t, &[a, b], &[c]).is_err());
        let e = row(&mut t, &[1.0]);
        assert!(relation_alignment_loss(&mut t, &[a], &[e]).is_err());
    }

    fn group(t: &mut Tape, pos: &[&[f64]], neg: &[&[f64]]) -> RelationGroup {
        RelationGroup {
            positives: pos.iter().map(|v| row(t, v)).collect(),
            negatives: neg.iter().map(|v| row(t, v)).collect(),
        }
    }

    #[test]
    fn contrastive_equal_similarities_is_zero() {
        // x_a·x_p = 1 and x_a·x_n = 1 in both directions
        let mut t = Tape::new();
        let g = group(&mut t, &[&[1.0, 0.0], &[1.0, 0.0]], &[&[1.0, 5.0]]);
        let out = contrastive_loss(&mut t, &[g], 0.5, false).unwrap();
        assert_eq!(out.terms, 2);
        assert!(t.value(out.loss).item().abs() < 1e-12);
    }

    #[test]
    fn contrastive_negative_value() {
        // anchor·positive = 1, anchor·negative = 0, τ = 0.5 → −2 per term
        let mut t = Tape::new();
        let g = group(&mut t, &[&[1.0, 0.0], &[1.0, 0.0]], &[&[0.0, 1.0]]);
        let out = contrastive_loss(&mut t, &[g], 0.5, false).unwrap();
        assert!((t.value(out.loss).item() - (-4.0)).abs() < 1e-12);
        // a=(1,0), p=(1,1), n=(0,1): term (a,p) has sims 1 vs 0 → −2;
        // term (p,a) has sims 1 vs 1 → 0
        let g = group(&mut t, &[&[1.0, 0.0], &[1.0, 1.0]], &[&[0.0, 1.0]]);
        let out = contrastive_loss(&mut t, &[g], 0.5, false).unwrap();
        assert!((t.value(out.loss).item() - (-2.0)).abs() < 1e-12);
        let g = group(&mut t, &[&[1.0, 0.0], &[1.0, 0.0]], &[&[0.0, 1.0]]);
        let out = contrastive_loss(&mut t, &[g], 0.5, true).unwrap();
        let per = -(2f64.exp() / (2f64.exp() + 1.0)).ln();
        assert!((t.value(out.loss).item() - 2.0 * per).abs() < 1e-12);
    }

    #[test]
    fn contrastive_term_count() {
        let mut t = Tape::new();
        let g = group(
            &mut t,
            &[&[1.0, 0.0], &[0.5, 0.5], &[0.0, 1.0], &[0.2, 0.1]],
            &[&[0.0, 1.0], &[1.0, 1.0]],
        );
        let out = contrastive_loss(&mut t, &[g.clone(), g], 1.0, false).unwrap();
        assert_eq!(out.terms, 2 * 4 * 3);
    }

    #[test]
    fn contrastive_errors() {
        let mut t = Tape::new();
        let g = group(&mut t, &[&[1.0]], &[&[0.0]]);
        assert!(contrastive_loss(&mut t, &[g], 0.5, false).is_err());
        let g = group(&mut t, &[&[1.0], &[2.0]], &[]);
        assert!(contrastive_loss(&mut t, &[g], 0.5, false).is_err());
        let g = group(&mut t, &[&[1.0], &[2.0]], &[&[0.0]]);
        assert!(contrastive_loss(&mut t, std::slice::from_ref(&g), 0.0, false).is_err());
        assert!(contrastive_loss(&mut t, &[g], -1.0, false).is_err());
    }

    #[test]
    fn totals() {
        let all = LossToggles::default();
        assert_eq!(total_loss(1.0, 2.0, 3.0, all), 6.0);
        let l3_only = LossToggles {
            l1: false,
            l2: false,
            l3: true,
        };
        assert_eq!(total_loss(1.0, 2.0, 3.0, l3_only), 3.0);
        let none = LossToggles {
            l1: false,
            l2: false,
            l3: false,
        };
        assert_eq!(total_loss(1.0, 2.0, 3.0, none), 0.0);

        let mut t = Tape::new();
        let parts: Vec<Var> = [1.0, 2.0, 3.0].iter().map(|&v| row(&mut t, &[v])).collect();
        let s = combine(&mut t, Some(parts[0]), Some(parts[1]), Some(parts[2]), l3_only).unwrap();
        assert_eq!(t.value(s).item(), 3.0);
    }
}

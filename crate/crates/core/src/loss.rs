//! Relevance-weighted multi-positive binary cross-entropy, the single-positive
//! baseline, and construction of per-sequence training targets.

use crate::data::ItemId;
use crate::relevance::RelevanceProfile;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

/// Which end of the future window gets the largest weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// The nearest future item gets the profile's largest weight.
    #[default]
    NearestFirst,
    /// Positive `i` (1 = nearest) gets profile weight `pos - i + 1`, i.e. the
    /// profile is applied reversed.
    Reversed,
}

impl Orientation {
    pub fn apply(self, profile: &RelevanceProfile) -> Vec<f64> {
        match self {
            Orientation::NearestFirst => profile.weights().to_vec(),
            Orientation::Reversed => profile.reversed(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LossBatchItem {
    /// Probabilities of the positives, nearest future item first.
    pub pos_probs: Vec<f64>,
    pub neg_probs: Vec<f64>,
    /// Weight per positive, aligned with `pos_probs`.
    pub weights: Vec<f64>,
}

impl LossBatchItem {
    pub fn new(pos_probs: Vec<f64>, neg_probs: Vec<f64>, profile: &RelevanceProfile) -> Self {
        LossBatchItem {
            pos_probs,
            neg_probs,
            weights: profile.weights().to_vec(),
        }
    }
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-sum_i w_i ln p_i - sum_j ln(1 - q_j)`.
pub fn relevance_loss(item: &LossBatchItem) -> Result<f64> {
    if item.pos_probs.len() != item.weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} positive probabilities but {} relevance weights",
            item.pos_probs.len(),
            item.weights.len()
        )));
    }
    let mut loss = 0.0;
    for (&p, &w) in item.pos_probs.iter().zip(&item.weights) {
        loss -= clamp_prob(p).ln() * w;
    }
    for &q in &item.neg_probs {
        loss -= (1.0 - clamp_prob(q)).ln();
    }
    Ok(loss)
}

/// Plain binary cross-entropy with one positive.
pub fn baseline_loss(item: &LossBatchItem) -> Result<f64> {
    if item.pos_probs.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "baseline loss takes exactly one positive, got {}",
            item.pos_probs.len()
        )));
    }
    let mut loss = -clamp_prob(item.pos_probs[0]).ln();
    for &q in &item.neg_probs {
        loss -= (1.0 - clamp_prob(q)).ln();
    }
    Ok(loss)
}

/// Weighted BCE on logits: returns the loss and its gradient with respect to
/// each logit. Term `k` is `-w_k ln p_k` for a positive and `-w_k ln(1 - p_k)`
/// for a negative, with `p_k = sigmoid(logit_k)` clamped; clamped terms have
/// zero gradient.
pub fn weighted_bce(logits: &[f64], labels: &[bool], weights: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(logits.len(), labels.len());
    debug_assert_eq!(logits.len(), weights.len());
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for ((&x, &label), &w) in logits.iter().zip(labels).zip(weights) {
        let p = sigmoid(x);
        let pc = clamp_prob(p);
        let clamped = pc != p;
        if label {
            loss -= pc.ln() * w;
            grad.push(if clamped { 0.0 } else { -w * (1.0 - p) });
        } else {
            loss -= (1.0 - pc).ln() * w;
            grad.push(if clamped { 0.0 } else { w * p });
        }
    }
    (loss, grad)
}

/// Scored (position, item) pairs with labels and weights for one training
/// sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceTargets {
    pub pairs: Vec<(usize, ItemId)>,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
}

impl SequenceTargets {
    fn push(&mut self, pos: usize, item: ItemId, label: bool, weight: f64) {
        self.pairs.push((pos, item));
        self.labels.push(label);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Model input and targets derived from one user's training span.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub context: Vec<ItemId>,
    pub targets: SequenceTargets,
    /// Number of positives at the final position (may be fewer than requested
    /// for short sequences).
    pub final_positives: usize,
}

/// Builds the training example for a sequence.
///
/// The last `pos` items (fewer if the sequence is short) are the weighted
/// positives of the final context position; every earlier context position
/// predicts its immediate successor with weight one, paired with one negative.
/// The final position gets `negatives(pos)` negatives. With `pos = 1` this is
/// exactly next-item prediction at every position.
///
/// `weights_for(k)` returns the positive weights for `k` positives, nearest
/// first. `sample(n)` draws `n` negatives. Returns `None` for sequences shorter
/// than two items.
pub fn build_example<W, S>(
    sequence: &[ItemId],
    max_len: usize,
    positives: usize,
    negatives_at_final: impl Fn(usize) -> usize,
    weights_for: W,
    mut sample: S,
) -> Option<TrainingExample>
where
    W: Fn(usize) -> Vec<f64>,
    S: FnMut(usize) -> Vec<ItemId>,
{
    let n = sequence.len();
    if n < 2 || positives == 0 || max_len == 0 {
        return None;
    }
    let eff = positives.min(n - 1);
    let ctx_end = n - eff;
    let ctx_start = ctx_end.saturating_sub(max_len);
    let context = sequence[ctx_start..ctx_end].to_vec();
    let m = context.len();

    let mut targets = SequenceTargets::default();
    let interior_negs = sample(m - 1);
    for t in 0..m - 1 {
        targets.push(t, sequence[ctx_start + t + 1], true, 1.0);
        targets.push(t, interior_negs[t], false, 1.0);
    }
    let weights = weights_for(eff);
    debug_assert_eq!(weights.len(), eff);
    for (k, w) in weights.into_iter().enumerate() {
        targets.push(m - 1, sequence[ctx_end + k], true, w);
    }
    for item in sample(negatives_at_final(eff)) {
        targets.push(m - 1, item, false, 1.0);
    }
    Some(TrainingExample {
        context,
        targets,
        final_positives: eff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relevance::RelevanceKind;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn profile(kind: RelevanceKind, k: usize) -> RelevanceProfile {
        RelevanceProfile::new(kind, k).unwrap()
    }

    #[test]
    fn single_positive_half_half() {
        let item = LossBatchItem::new(vec![0.5], vec![0.5], &profile(RelevanceKind::Fixed, 1));
        assert_abs_diff_eq!(relevance_loss(&item).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(relevance_loss(&item).unwrap(), 1.38629, epsilon = 5e-6);
    }

    #[test]
    fn perfect_predictions_vanish() {
        let item = LossBatchItem::new(
            vec![1.0 - 1e-7; 3],
            vec![1e-7; 3],
            &profile(RelevanceKind::Linear, 3),
        );
        let l = relevance_loss(&item).unwrap();
        assert!((0.0..1e-6).contains(&l), "{l}");
    }

    #[test]
    fn linear_tail_contributes_nothing() {
        let item = LossBatchItem::new(vec![0.5, 0.01], vec![], &profile(RelevanceKind::Linear, 2));
        assert_abs_diff_eq!(relevance_loss(&item).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn fixed_two_is_half_unweighted() {
        let (p, q) = (0.3, 0.8);
        let item = LossBatchItem::new(vec![p, q], vec![], &profile(RelevanceKind::Fixed, 2));
        let unweighted = -(p.ln()) - q.ln();
        assert_abs_diff_eq!(relevance_loss(&item).unwrap(), 0.5 * unweighted, epsilon = 1e-15);
    }

    #[test]
    fn baseline_examples() {
        let item = LossBatchItem::new(vec![0.9], vec![0.1], &profile(RelevanceKind::Fixed, 1));
        let b = baseline_loss(&item).unwrap();
        assert_abs_diff_eq!(b, -2.0 * 0.9f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.21072, epsilon = 5e-6);
        assert_eq!(b.to_bits(), relevance_loss(&item).unwrap().to_bits());

        let no_neg = LossBatchItem::new(vec![0.25], vec![], &profile(RelevanceKind::Fixed, 1));
        assert_eq!(baseline_loss(&no_neg).unwrap(), -(0.25f64.ln()));
    }

    #[test]
    fn errors() {
        let two = LossBatchItem::new(vec![0.5, 0.5], vec![], &profile(RelevanceKind::Fixed, 2));
        assert!(baseline_loss(&two).is_err());
        let mismatch = LossBatchItem {
            pos_probs: vec![0.5],
            neg_probs: vec![],
            weights: vec![0.5, 0.5],
        };
        assert!(relevance_loss(&mismatch).is_err());
    }

    #[test]
    fn k1_every_kind_matches_baseline() {
        for kind in RelevanceKind::ALL {
            let item = LossBatchItem::new(vec![0.37], vec![0.2, 0.6], &profile(kind, 1));
            assert_eq!(
                relevance_loss(&item).unwrap().to_bits(),
                baseline_loss(&item).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn orientation() {
        let p = profile(RelevanceKind::Linear, 3);
        assert_eq!(Orientation::NearestFirst.apply(&p), p.weights());
        assert_eq!(Orientation::Reversed.apply(&p), vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn logits_path_matches_probability_path() {
        let pos = [0.3, -1.2, 2.5];
        let neg = [-0.4, 0.9];
        let pr = profile(RelevanceKind::Power, 3);
        let item = LossBatchItem::new(
            pos.iter().map(|&x| sigmoid(x)).collect(),
            neg.iter().map(|&x| sigmoid(x)).collect(),
            &pr,
        );
        let logits: Vec<f64> = pos.iter().chain(&neg).copied().collect();
        let labels = [true, true, true, false, false];
        let weights: Vec<f64> = pr.weights().iter().copied().chain([1.0, 1.0]).collect();
        let (l, g) = weighted_bce(&logits, &labels, &weights);
        assert_eq!(l.to_bits(), relevance_loss(&item).unwrap().to_bits());
        // central differences on each logit
        for k in 0..logits.len() {
            let h = 1e-6;
            let mut a = logits.clone();
            a[k] += h;
            let mut b = logits.clone();
            b[k] -= h;
            let fd = (weighted_bce(&a, &labels, &weights).0 - weighted_bce(&b, &labels, &weights).0) / (2.0 * h);
            assert_abs_diff_eq!(fd, g[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn example_construction() {
        let seq: Vec<ItemId> = (1..=8).collect();
        let mut next = 100;
        let ex = build_example(
            &seq,
            10,
            3,
            |k| k,
            |k| RelevanceProfile::new(RelevanceKind::Linear, k).unwrap().weights().to_vec(),
            |n| {
                let v: Vec<ItemId> = (next..next + n as ItemId).collect();
                next += n as ItemId;
                v
            },
        )
        .unwrap();
        assert_eq!(ex.context, vec![1, 2, 3, 4, 5]);
        assert_eq!(ex.final_positives, 3);
        // 4 interior positions x (pos + neg) + 3 pos + 3 neg
        assert_eq!(ex.targets.len(), 14);
        assert_eq!(ex.targets.pairs[0], (0, 2));
        assert_eq!(ex.targets.pairs[1], (0, 100));
        assert_eq!(&ex.targets.pairs[8..11], &[(4, 6), (4, 7), (4, 8)]);
        assert_eq!(&ex.targets.weights[8..11], &[2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert_eq!(&ex.targets.labels[11..], &[false, false, false]);
    }

    #[test]
    fn example_single_positive_is_next_item() {
        let seq: Vec<ItemId> = (1..=6).collect();
        let ex = build_example(&seq, 3, 1, |k| k, |_| vec![1.0], |n| vec![99; n]).unwrap();
        assert_eq!(ex.context, vec![3, 4, 5]);
        let positives: Vec<(usize, ItemId)> = ex
            .targets
            .pairs
            .iter()
            .zip(&ex.targets.labels)
            .filter(|(_, &l)| l)
            .map(|(p, _)| *p)
            .collect();
        assert_eq!(positives, vec![(0, 4), (1, 5), (2, 6)]);
    }

    #[test]
    fn example_short_sequences() {
        assert!(build_example(&[1], 5, 1, |k| k, |_| vec![1.0], |n| vec![9; n]).is_none());
        let ex = build_example(&[1, 2, 3], 5, 10, |k| k, |k| vec![1.0 / k as f64; k], |n| vec![9; n]).unwrap();
        assert_eq!(ex.final_positives, 2);
        assert_eq!(ex.context, vec![1]);
    }

    proptest! {
        #[test]
        fn monotone_in_probabilities(
            pos in prop::collection::vec(0.01f64..0.99, 1..6),
            neg in prop::collection::vec(0.01f64..0.99, 0..6),
            which in 0usize..12,
            bump in 0.0f64..0.5,
            kind in 0usize..4,
        ) {
            let pr = profile(RelevanceKind::ALL[kind], pos.len());
            let base = relevance_loss(&LossBatchItem::new(pos.clone(), neg.clone(), &pr)).unwrap();
            prop_assert!(base >= 0.0 && base.is_finite());
            let i = which % pos.len();
            let mut up = pos.clone();
            up[i] = (up[i] + bump).min(0.999);
            let l = relevance_loss(&LossBatchItem::new(up, neg.clone(), &pr)).unwrap();
            prop_assert!(l <= base + 1e-12);
            if !neg.is_empty() {
                let j = which % neg.len();
                let mut up = neg.clone();
                up[j] = (up[j] + bump).min(0.999);
                let l = relevance_loss(&LossBatchItem::new(pos.clone(), up, &pr)).unwrap();
                prop_assert!(l >= base - 1e-12);
            }
        }

        #[test]
        fn linear_in_weights(
            pos in prop::collection::vec(0.01f64..0.99, 1..6),
            a in prop::collection::vec(0.0f64..2.0, 6),
            b in prop::collection::vec(0.0f64..2.0, 6),
            s in -3.0f64..3.0,
        ) {
            let k = pos.len();
            let mk = |w: Vec<f64>| LossBatchItem { pos_probs: pos.clone(), neg_probs: vec![], weights: w };
            let wa = a[..k].to_vec();
            let wb = b[..k].to_vec();
            let wc: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| x + s * y).collect();
            let la = relevance_loss(&mk(wa)).unwrap();
            let lb = relevance_loss(&mk(wb)).unwrap();
            let lc = relevance_loss(&mk(wc)).unwrap();
            prop_assert!((lc - (la + s * lb)).abs() < 1e-9 * (1.0 + lc.abs()));
        }
    }
}

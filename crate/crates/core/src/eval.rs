//! Sampled-candidate ranking evaluation.
//!
//! Each evaluated user gets a fixed set of negatives (drawn once per user and
//! seed, excluding everything the user ever interacted with). The candidates
//! are the user's held-out positives plus those negatives, ranked by model
//! score. With one positive this is the classic leave-one-out protocol; with K
//! positives the ideal ranking lists them in temporal order.

use std::collections::HashSet;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ItemId, UserId};
use crate::exec::{self, Execution};
use crate::model::ModelParams;
use crate::rng::{self, Purpose};
use crate::split::SplitDataset;
use crate::{Error, Result};

pub const DEFAULT_NEGATIVES: usize = 100;
pub const DEFAULT_CUTOFF: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// The j-th nearest of K positives has gain `K - j + 1`.
    #[default]
    Graded,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitMode {
    /// Fraction of positives in the top k, out of `min(K, k)`.
    #[default]
    Recall,
    /// 1 if any positive is in the top k.
    AnyHit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Traditional,
    Mfi,
}

impl Protocol {
    pub fn for_k(k_eval: usize) -> Self {
        if k_eval == 1 {
            Protocol::Traditional
        } else {
            Protocol::Mfi
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Traditional => "traditional",
            Protocol::Mfi => "mfi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub ndcg_at_k: f64,
    pub hr_at_k: f64,
    pub cutoff: usize,
    pub k_eval: usize,
    pub protocol: Protocol,
    pub num_users_evaluated: usize,
    pub num_users_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCase {
    pub user: UserId,
    pub context: Vec<ItemId>,
    /// Held-out items, nearest future item first, without repeats.
    pub positives: Vec<ItemId>,
    pub negatives: Vec<ItemId>,
}

/// Which held-out span a case set targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Positives from the validation span, context = train span.
    Valid,
    /// Positives from the test span, context = train + validation.
    Test,
}

#[derive(Debug, Clone)]
pub struct CaseSet {
    pub cases: Vec<EvalCase>,
    pub skipped: usize,
}

/// Draws `n` distinct items uniformly from `1..=num_items` minus `exclude`.
pub fn sample_negatives<R: Rng>(
    user: UserId,
    exclude: &HashSet<ItemId>,
    num_items: usize,
    n: usize,
    r: &mut R,
) -> Result<Vec<ItemId>> {
    let excluded_in_range = exclude
        .iter()
        .filter(|&&i| i >= 1 && i as usize <= num_items)
        .count();
    let eligible = num_items - excluded_in_range;
    if eligible < n {
        return Err(Error::NotEnoughNegatives {
            user,
            eligible,
            requested: n,
        });
    }
    if eligible <= 4 * n {
        let pool: Vec<ItemId> = (1..=num_items as ItemId)
            .filter(|i| !exclude.contains(i))
            .collect();
        return Ok(pool.choose_multiple(r, n).copied().collect());
    }
    let mut chosen = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    while chosen.len() < n {
        let i = r.random_range(1..=num_items as ItemId);
        if !exclude.contains(&i) && seen.insert(i) {
            chosen.push(i);
        }
    }
    Ok(chosen)
}

/// Orders `items` by descending score, ties by ascending item id.
pub fn rank_candidates(items: &[ItemId], scores: &[f64]) -> Result<Vec<ItemId>> {
    if items.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates but {} scores",
            items.len(),
            scores.len()
        )));
    }
    if let Some(k) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NanScore { item: items[k] });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("no NaN")
            .then(items[a].cmp(&items[b]))
    });
    Ok(order.into_iter().map(|k| items[k]).collect())
}

fn check_metric_args(positives: &[ItemId], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("cutoff must be >= 1".into()));
    }
    if positives.is_empty() {
        return Err(Error::InvalidArgument("no positives to evaluate".into()));
    }
    Ok(())
}

fn gain(j: usize, big_k: usize, mode: GainMode) -> f64 {
    match mode {
        GainMode::Graded => (big_k - j) as f64,
        GainMode::Binary => 1.0,
    }
}

/// NDCG@k of a ranking against temporally ordered positives.
pub fn ndcg_at_k(ranking: &[ItemId], positives: &[ItemId], k: usize, mode: GainMode) -> Result<f64> {
    check_metric_args(positives, k)?;
    let big_k = positives.len();
    let mut dcg = 0.0;
    for (p, item) in ranking.iter().take(k).enumerate() {
        if let Some(j) = positives.iter().position(|x| x == item) {
            dcg += gain(j, big_k, mode) / ((p + 2) as f64).log2();
        }
    }
    // gains are non-increasing in j, so temporal order is the ideal arrangement
    let idcg: f64 = (0..big_k.min(k))
        .map(|p| gain(p, big_k, mode) / ((p + 2) as f64).log2())
        .sum();
    Ok(dcg / idcg)
}

/// Hit rate at k; with several positives, recall at k by default.
pub fn hr_at_k(ranking: &[ItemId], positives: &[ItemId], k: usize, mode: HitMode) -> Result<f64> {
    check_metric_args(positives, k)?;
    let hits = ranking.iter().take(k).filter(|i| positives.contains(i)).count();
    Ok(match mode {
        HitMode::Recall => hits as f64 / positives.len().min(k) as f64,
        HitMode::AnyHit => f64::from(u8::from(hits > 0)),
    })
}

/// Anything that scores candidate items for a user given a context.
pub trait Scorer: Sync {
    fn score(&self, user: UserId, context: &[ItemId], items: &[ItemId]) -> Result<Vec<f64>>;
}

impl Scorer for ModelParams {
    fn score(&self, _user: UserId, context: &[ItemId], items: &[ItemId]) -> Result<Vec<f64>> {
        let h = self.final_hidden(context)?;
        ModelParams::score(self, &h, items)
    }
}

/// Scores items by interaction count in the training spans.
#[derive(Debug, Clone)]
pub struct PopularityScorer {
    counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn from_split(split: &SplitDataset) -> Self {
        let mut counts = vec![0.0; split.num_items() + 1];
        for u in split.dataset().users() {
            for &i in split.training_sequence(u) {
                counts[i as usize] += 1.0;
            }
        }
        PopularityScorer { counts }
    }
}

impl Scorer for PopularityScorer {
    fn score(&self, _user: UserId, _context: &[ItemId], items: &[ItemId]) -> Result<Vec<f64>> {
        Ok(items.iter().map(|&i| self.counts[i as usize]).collect())
    }
}

/// Independent uniform scores per (seed, user, item).
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, user: UserId, _context: &[ItemId], items: &[ItemId]) -> Result<Vec<f64>> {
        Ok(items
            .iter()
            .map(|&i| {
                let h = rng::derive_seed(self.seed, Purpose::RandomScorer, &[user as u64, i as u64]);
                (h >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect())
    }
}

/// Builds evaluation cases for every evaluable user. Negatives depend only on
/// `(seed, stage, user)`, so the same users get the same negatives whatever the
/// number of positives evaluated.
pub fn prepare_cases(
    split: &SplitDataset,
    stage: Stage,
    n_neg: usize,
    seed: u64,
    mode: Execution,
) -> Result<CaseSet> {
    let users = split.evaluable_users();
    let purpose = match stage {
        Stage::Valid => Purpose::ValidNegatives,
        Stage::Test => Purpose::EvalNegatives,
    };
    let cases: Vec<Option<EvalCase>> = exec::try_map::<_, _, Error, _>(mode, &users, |&u| {
        let s = split.user(u).expect("evaluable user");
        let (context, held_out) = match stage {
            Stage::Valid => (s.train.to_vec(), s.valid),
            Stage::Test => (s.test_context(), s.test),
        };
        if held_out.is_empty() {
            return Ok(None);
        }
        let mut positives = Vec::with_capacity(held_out.len());
        for &i in held_out {
            if !positives.contains(&i) {
                positives.push(i);
            }
        }
        let exclude: HashSet<ItemId> = split.dataset().sequence(u).iter().copied().collect();
        let mut r = rng::stream(seed, purpose, &[u as u64]);
        let negatives = sample_negatives(u, &exclude, split.num_items(), n_neg, &mut r)?;
        Ok(Some(EvalCase {
            user: u,
            context,
            positives,
            negatives,
        }))
    })?;
    let evaluable = cases.len();
    let cases: Vec<EvalCase> = cases.into_iter().flatten().collect();
    Ok(CaseSet {
        skipped: split.skipped_users().len() + (evaluable - cases.len()),
        cases,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricOptions {
    pub cutoff: usize,
    pub gain: GainMode,
    pub hit: HitMode,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            cutoff: DEFAULT_CUTOFF,
            gain: GainMode::Graded,
            hit: HitMode::Recall,
        }
    }
}

/// Evaluates several positive counts at once; each case is scored once.
/// For `k` positives a case uses its first `k` positives plus all negatives.
pub fn evaluate_cases<S: Scorer + ?Sized>(
    scorer: &S,
    set: &CaseSet,
    k_evals: &[usize],
    opts: MetricOptions,
    mode: Execution,
) -> Result<Vec<MetricRecord>> {
    if set.cases.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    if let Some(&k) = k_evals.iter().find(|&&k| k == 0) {
        return Err(Error::InvalidArgument(format!("k_eval {k} must be >= 1")));
    }
    // per case: (ndcg, hr) for each k
    let per_case: Vec<Vec<(f64, f64)>> = exec::try_map::<_, _, Error, _>(mode, &set.cases, |case| {
        let kmax = k_evals.iter().copied().max().unwrap_or(1).min(case.positives.len());
        let mut items: Vec<ItemId> = case.positives[..kmax].to_vec();
        items.extend_from_slice(&case.negatives);
        let scores = scorer.score(case.user, &case.context, &items)?;
        k_evals
            .iter()
            .map(|&k| {
                let k = k.min(case.positives.len());
                let mut cand: Vec<ItemId> = items[..k].to_vec();
                cand.extend_from_slice(&items[kmax..]);
                let mut cs: Vec<f64> = scores[..k].to_vec();
                cs.extend_from_slice(&scores[kmax..]);
                let ranking = rank_candidates(&cand, &cs)?;
                let pos = &case.positives[..k];
                Ok((
                    ndcg_at_k(&ranking, pos, opts.cutoff, opts.gain)?,
                    hr_at_k(&ranking, pos, opts.cutoff, opts.hit)?,
                ))
            })
            .collect()
    })?;
    let n = per_case.len() as f64;
    Ok(k_evals
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let (mut ndcg, mut hr) = (0.0, 0.0);
            for row in &per_case {
                ndcg += row[idx].0;
                hr += row[idx].1;
            }
            MetricRecord {
                ndcg_at_k: ndcg / n,
                hr_at_k: hr / n,
                cutoff: opts.cutoff,
                k_eval: k,
                protocol: Protocol::for_k(k),
                num_users_evaluated: per_case.len(),
                num_users_skipped: set.skipped,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub k_eval: usize,
    pub cutoff: usize,
    pub n_neg: usize,
    pub gain: GainMode,
    pub hit: HitMode,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(k_eval: usize, seed: u64) -> Self {
        ProtocolConfig {
            k_eval,
            cutoff: DEFAULT_CUTOFF,
            n_neg: DEFAULT_NEGATIVES,
            gain: GainMode::Graded,
            hit: HitMode::Recall,
            seed,
        }
    }
}

/// Test-span evaluation under one protocol.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    split: &SplitDataset,
    cfg: &ProtocolConfig,
    mode: Execution,
) -> Result<MetricRecord> {
    if cfg.k_eval > split.spec().k_test {
        return Err(Error::InvalidArgument(format!(
            "k_eval {} exceeds the split's k_test {}",
            cfg.k_eval,
            split.spec().k_test
        )));
    }
    let set = prepare_cases(split, Stage::Test, cfg.n_neg, cfg.seed, mode)?;
    let opts = MetricOptions {
        cutoff: cfg.cutoff,
        gain: cfg.gain,
        hit: cfg.hit,
    };
    Ok(evaluate_cases(scorer, &set, &[cfg.k_eval], opts, mode)?.remove(0))
}

/// The single-positive protocol computed directly from the positive's rank
/// among its negatives, without building a ranking. Uses the nearest test
/// item and the same negatives as [`evaluate`].
pub fn evaluate_traditional<S: Scorer + ?Sized>(
    scorer: &S,
    split: &SplitDataset,
    cutoff: usize,
    n_neg: usize,
    seed: u64,
    mode: Execution,
) -> Result<MetricRecord> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("cutoff must be >= 1".into()));
    }
    let set = prepare_cases(split, Stage::Test, n_neg, seed, mode)?;
    if set.cases.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    let per_case: Vec<(f64, f64)> = exec::try_map(mode, &set.cases, |case| {
        let target = case.positives[0];
        let mut items = vec![target];
        items.extend_from_slice(&case.negatives);
        let scores = scorer.score(case.user, &case.context, &items)?;
        if let Some(k) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::NanScore { item: items[k] });
        }
        let s0 = scores[0];
        let rank = items[1..]
            .iter()
            .zip(&scores[1..])
            .filter(|&(&i, &s)| s > s0 || (s == s0 && i < target))
            .count();
        Ok(if rank < cutoff {
            (1.0 / ((rank + 2) as f64).log2(), 1.0)
        } else {
            (0.0, 0.0)
        })
    })?;
    let n = per_case.len() as f64;
    let (mut ndcg, mut hr) = (0.0, 0.0);
    for (a, b) in &per_case {
        ndcg += a;
        hr += b;
    }
    Ok(MetricRecord {
        ndcg_at_k: ndcg / n,
        hr_at_k: hr / n,
        cutoff,
        k_eval: 1,
        protocol: Protocol::Traditional,
        num_users_evaluated: per_case.len(),
        num_users_skipped: set.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::split::{split, SplitSpec};
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;

    #[test]
    fn sampling_excludes_and_is_deterministic() {
        let exclude: HashSet<ItemId> = [1, 2, 3].into_iter().collect();
        let mut r = rng::stream(5, Purpose::EvalNegatives, &[1]);
        let s = sample_negatives(1, &exclude, 10, 3, &mut r).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|i| (4..=10).contains(i)));
        assert_eq!(s.iter().collect::<HashSet<_>>().len(), 3);
        let mut r2 = rng::stream(5, Purpose::EvalNegatives, &[1]);
        assert_eq!(sample_negatives(1, &exclude, 10, 3, &mut r2).unwrap(), s);
    }

    #[test]
    fn sampling_infeasible_names_user() {
        let exclude: HashSet<ItemId> = (1..=8).collect();
        let mut r = rng::stream(5, Purpose::EvalNegatives, &[]);
        let err = sample_negatives(42, &exclude, 10, 3, &mut r).unwrap_err();
        assert!(matches!(
            err,
            Error::NotEnoughNegatives {
                user: 42,
                eligible: 2,
                requested: 3
            }
        ));
    }

    #[test]
    fn sampling_is_uniform() {
        // 10,000 draws of 1 item from 97 eligible (catalogue 100, 3 excluded)
        let exclude: HashSet<ItemId> = [10, 20, 30].into_iter().collect();
        let mut counts = vec![0usize; 101];
        let mut r = rng::stream(1, Purpose::EvalNegatives, &[]);
        let draws = 10_000;
        for _ in 0..draws {
            for i in sample_negatives(1, &exclude, 100, 1, &mut r).unwrap() {
                counts[i as usize] += 1;
            }
        }
        let p = 1.0 / 97.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for i in 1..=100 {
            if exclude.contains(&(i as ItemId)) {
                assert_eq!(counts[i], 0);
            } else {
                assert!((counts[i] as f64 - mean).abs() < 4.0 * sd, "item {i}: {}", counts[i]);
            }
        }
        // the dense-pool path too
        let mut counts = [0usize; 11];
        for _ in 0..draws {
            for i in sample_negatives(1, &HashSet::new(), 10, 5, &mut r).unwrap() {
                counts[i as usize] += 1;
            }
        }
        let p = 0.5;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in &counts[1..] {
            assert!((*c as f64 - draws as f64 * p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_candidates(&[7, 2, 5], &[0.9, 0.1, 0.5]).unwrap(), vec![7, 5, 2]);
        assert_eq!(rank_candidates(&[9, 4], &[0.3, 0.3]).unwrap(), vec![4, 9]);
        assert!(matches!(
            rank_candidates(&[1, 2], &[0.1, f64::NAN]),
            Err(Error::NanScore { item: 2 })
        ));
    }

    #[test]
    fn ranking_matches_naive_sort() {
        let mut r = rng::stream(3, Purpose::Synthetic, &[]);
        for _ in 0..1000 {
            let n = r.random_range(1..30);
            let mut items: Vec<ItemId> = (1..=200).collect();
            items.shuffle(&mut r);
            items.truncate(n);
            // coarse scores force ties
            let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..5u8))).collect();
            let got = rank_candidates(&items, &scores).unwrap();
            // naive selection sort oracle
            let mut pool: Vec<(ItemId, f64)> = items.iter().copied().zip(scores.iter().copied()).collect();
            let mut want = Vec::new();
            while !pool.is_empty() {
                let mut best = 0;
                for k in 1..pool.len() {
                    let (bi, bs) = pool[best];
                    let (ki, ks) = pool[k];
                    if ks > bs || (ks == bs && ki < bi) {
                        best = k;
                    }
                }
                want.push(pool.remove(best).0);
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn ndcg_examples() {
        let g = GainMode::Graded;
        assert_eq!(ndcg_at_k(&[5, 1, 2], &[5], 10, g).unwrap(), 1.0);
        assert_abs_diff_eq!(ndcg_at_k(&[1, 2, 5, 3], &[5], 10, g).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(ndcg_at_k(&[5, 6, 1], &[5, 6], 10, g).unwrap(), 1.0);
        let swapped = ndcg_at_k(&[6, 5, 1], &[5, 6], 10, g).unwrap();
        let want = (1.0 + 2.0 / 3f64.log2()) / (2.0 + 1.0 / 3f64.log2());
        assert_abs_diff_eq!(swapped, want, epsilon = 1e-15);
        assert_abs_diff_eq!(swapped, 0.85972, epsilon = 5e-6);
        assert_eq!(ndcg_at_k(&[6, 5, 1], &[5, 6], 10, GainMode::Binary).unwrap(), 1.0);
        assert!(ndcg_at_k(&[1], &[], 10, g).is_err());
        assert!(ndcg_at_k(&[1], &[1], 0, g).is_err());
    }

    #[test]
    fn hr_examples() {
        let ranking: Vec<ItemId> = (1..=20).collect();
        assert_eq!(hr_at_k(&ranking, &[4], 10, HitMode::Recall).unwrap(), 1.0);
        let six: Vec<ItemId> = vec![1, 3, 5, 7, 9, 10, 11, 12, 13, 14];
        assert_abs_diff_eq!(hr_at_k(&ranking, &six, 10, HitMode::Recall).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(hr_at_k(&ranking, &six, 10, HitMode::AnyHit).unwrap(), 1.0);
        let none: Vec<ItemId> = (11..=20).collect();
        assert_eq!(hr_at_k(&ranking, &none, 10, HitMode::Recall).unwrap(), 0.0);
        assert!(hr_at_k(&ranking, &[], 10, HitMode::Recall).is_err());
    }

    fn toy_split_dataset() -> Dataset {
        let seqs = (0..30u32)
            .map(|u| (0..25).map(|k| (u * 3 + k * 7) % 150 + 1).collect())
            .collect();
        Dataset::from_sequences(seqs, 150).unwrap()
    }

    #[test]
    fn mfi_k1_equals_traditional() {
        let ds = toy_split_dataset();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        let scorer = RandomScorer { seed: 4 };
        for mode in [Execution::Sequential, Execution::Parallel] {
            let mfi = evaluate(&scorer, &sp, &ProtocolConfig::new(1, 9), mode).unwrap();
            let trad = evaluate_traditional(&scorer, &sp, 10, 100, 9, mode).unwrap();
            assert_eq!(mfi, trad);
        }
    }

    #[test]
    fn evaluate_rejects_k_beyond_split() {
        let ds = toy_split_dataset();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        assert!(evaluate(&RandomScorer { seed: 1 }, &sp, &ProtocolConfig::new(3, 1), Execution::Sequential).is_err());
    }

    #[test]
    fn empty_evaluable_set_is_error() {
        let ds = Dataset::from_sequences(vec![vec![1, 2]], 200).unwrap();
        let sp = split(&ds, SplitSpec::new(5, 1, 1).unwrap()).unwrap();
        let err = evaluate(&RandomScorer { seed: 1 }, &sp, &ProtocolConfig::new(5, 1), Execution::Sequential)
            .unwrap_err();
        assert!(matches!(err, Error::NoEvaluableUsers));
    }

    #[test]
    fn negatives_avoid_the_full_sequence() {
        let ds = toy_split_dataset();
        let sp = split(&ds, SplitSpec::new(5, 1, 1).unwrap()).unwrap();
        let set = prepare_cases(&sp, Stage::Test, 100, 3, Execution::Sequential).unwrap();
        for c in &set.cases {
            let full: HashSet<ItemId> = ds.sequence(c.user).iter().copied().collect();
            assert!(c.negatives.iter().all(|n| !full.contains(n)));
            assert_eq!(c.negatives.len(), 100);
            assert_eq!(c.positives.len(), 5);
        }
    }
}

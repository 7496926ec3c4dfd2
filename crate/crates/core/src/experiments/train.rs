//! Mini-batch training with deterministic gradient accumulation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{ItemId, UserId};
use crate::exec::{self, Execution};
use crate::loss::{build_example, Orientation, TrainingExample};
use crate::model::{Adam, AdamConfig, Matrix, ModelParams};
use crate::relevance::{RelevanceKind, RelevanceProfile};
use crate::rng::{self, Purpose};
use crate::split::SplitDataset;
use crate::{Error, Result};

/// Examples per gradient-accumulation chunk. Fixed so that the floating-point
/// reduction order never depends on the thread pool.
pub const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub relevance: RelevanceKind,
    pub positives: usize,
    pub negatives: Option<usize>,
    pub orientation: Orientation,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub mode: Execution,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            relevance: RelevanceKind::Linear,
            positives: 1,
            negatives: None,
            orientation: Orientation::NearestFirst,
            batch_size: 128,
            adam: AdamConfig::default(),
            mode: Execution::Parallel,
        }
    }
}

/// Draws `n` training negatives (with replacement) outside `exclude`.
pub fn draw_training_negatives<R: Rng>(
    user: UserId,
    exclude: &HashSet<ItemId>,
    num_items: usize,
    n: usize,
    r: &mut R,
) -> Result<Vec<ItemId>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let eligible = (1..=num_items as ItemId)
        .filter(|i| !exclude.contains(i))
        .count();
    if eligible == 0 {
        return Err(Error::NotEnoughNegatives {
            user,
            eligible,
            requested: n,
        });
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = r.random_range(1..=num_items as ItemId);
        if !exclude.contains(&i) {
            out.push(i);
        }
    }
    Ok(out)
}

pub struct Trainer<'s, 'd> {
    split: &'s SplitDataset<'d>,
    settings: TrainSettings,
    seed: u64,
    params: ModelParams,
    adam: Adam,
    users: Vec<UserId>,
    weights: Vec<Vec<f64>>,
}

impl<'s, 'd> Trainer<'s, 'd> {
    pub fn new(split: &'s SplitDataset<'d>, params: ModelParams, settings: TrainSettings, seed: u64) -> Result<Self> {
        if settings.positives == 0 || settings.batch_size == 0 || settings.negatives == Some(0) {
            return Err(Error::InvalidConfig(
                "positives, negatives and batch size must be >= 1".into(),
            ));
        }
        if params.config().num_items != split.num_items() {
            return Err(Error::InvalidConfig(format!(
                "model has {} items, dataset has {}",
                params.config().num_items,
                split.num_items()
            )));
        }
        // weights[k - 1] = positive weights for k positives
        let weights = (1..=settings.positives)
            .map(|k| {
                let profile = RelevanceProfile::new(settings.relevance, k)?;
                Ok(settings.orientation.apply(&profile))
            })
            .collect::<Result<Vec<_>>>()?;
        let users = split
            .dataset()
            .users()
            .filter(|&u| split.training_sequence(u).len() >= 2)
            .collect();
        let adam = Adam::new(settings.adam, params.tensors());
        Ok(Trainer {
            split,
            settings,
            seed,
            params,
            adam,
            users,
            weights,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn set_state(&mut self, params: ModelParams, adam: Adam) -> Result<()> {
        if params.config() != self.params.config() || adam.m.len() != params.tensors().len() {
            return Err(Error::InvalidConfig(
                "restored state does not match the model configuration".into(),
            ));
        }
        self.params = params;
        self.adam = adam;
        Ok(())
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Users with at least two training items.
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// The training example of `user` in `epoch`; negatives come from a stream
    /// keyed by `(seed, epoch, user)`.
    pub fn example(&self, epoch: u32, user: UserId) -> Result<Option<TrainingExample>> {
        let seq = self.split.training_sequence(user);
        let exclude: HashSet<ItemId> = self.split.dataset().sequence(user).iter().copied().collect();
        let num_items = self.split.num_items();
        let mut r = rng::stream(self.seed, Purpose::TrainNegatives, &[epoch as u64, user as u64]);
        let mut err = None;
        let ex = build_example(
            seq,
            self.params.config().max_len,
            self.settings.positives,
            |eff| self.settings.negatives.unwrap_or(eff),
            |eff| self.weights[eff - 1].clone(),
            |n| match draw_training_negatives(user, &exclude, num_items, n, &mut r) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    vec![1; n]
                }
            },
        );
        match err {
            Some(e) => Err(e),
            None => Ok(ex),
        }
    }

    /// Loss and gradient of one batch, normalised by its number of context
    /// positions. Does not update parameters.
    pub fn batch_gradients(&self, epoch: u32, users: &[UserId]) -> Result<(f64, Vec<Matrix>, usize)> {
        let mode = self.settings.mode;
        let examples: Vec<Option<(UserId, TrainingExample)>> =
            exec::try_map::<_, _, Error, _>(mode, users, |&u| {
                Ok(self.example(epoch, u)?.map(|e| (u, e)))
            })?;
        let examples: Vec<(UserId, TrainingExample)> = examples.into_iter().flatten().collect();
        let positions: usize = examples.iter().map(|(_, e)| e.context.len()).sum();
        let mut total = self.params.zero_grads();
        if positions == 0 {
            return Ok((0.0, total, 0));
        }
        let scale = 1.0 / positions as f64;
        let parts = exec::try_map_chunks::<_, _, Error, _>(mode, &examples, GRAD_CHUNK, |chunk| {
            let mut grads = self.params.zero_grads();
            let mut loss = 0.0;
            for (u, ex) in chunk {
                let mut r = rng::stream(self.seed, Purpose::Dropout, &[epoch as u64, *u as u64]);
                loss += self.params.accumulate_gradients(ex, scale, true, &mut r, &mut grads)?;
            }
            Ok((loss, grads))
        })?;
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (t, gi) in total.iter_mut().zip(&g) {
                t.add_assign(gi);
            }
        }
        Ok((loss, total, positions))
    }

    /// One pass over all users in a seeded order; returns the mean loss per
    /// context position.
    pub fn train_epoch(&mut self, epoch: u32) -> Result<f64> {
        let mut order = self.users.clone();
        order.shuffle(&mut rng::stream(self.seed, Purpose::Shuffle, &[epoch as u64]));
        let (mut weighted, mut positions) = (0.0, 0usize);
        for batch in order.chunks(self.settings.batch_size) {
            let (loss, grads, n) = self.batch_gradients(epoch, batch)?;
            if n == 0 {
                continue;
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("epoch {epoch}")));
            }
            self.adam.step(self.params.tensors_mut(), &grads);
            weighted += loss * n as f64;
            positions += n;
        }
        Ok(if positions == 0 { 0.0 } else { weighted / positions as f64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::model::ModelConfig;
    use crate::split::{split, SplitSpec};

    fn toy() -> Dataset {
        let seqs = (0..12)
            .map(|u| (0..10).map(|t| ((u * 3 + t) % 30 + 1) as ItemId).collect())
            .collect();
        Dataset::from_sequences(seqs, 40).unwrap()
    }

    fn model(num_items: usize) -> ModelParams {
        ModelParams::init(&ModelConfig {
            hidden_dim: 8,
            num_blocks: 1,
            num_heads: 2,
            max_len: 6,
            dropout_rate: 0.1,
            num_items,
            seed: 1,
        })
        .unwrap()
    }

    fn settings(mode: Execution) -> TrainSettings {
        TrainSettings {
            positives: 3,
            batch_size: 5,
            mode,
            ..Default::default()
        }
    }

    #[test]
    fn negatives_avoid_sequence() {
        let ds = toy();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        let t = Trainer::new(&sp, model(40), settings(Execution::Sequential), 5).unwrap();
        for u in ds.users() {
            let ex = t.example(0, u).unwrap().unwrap();
            let seq: HashSet<ItemId> = ds.sequence(u).iter().copied().collect();
            for (i, &label) in ex.targets.labels.iter().enumerate() {
                let item = ex.targets.pairs[i].1;
                assert_eq!(label, seq.contains(&item));
            }
            assert_eq!(ex.final_positives, 3);
            assert_eq!(t.example(0, u).unwrap(), Some(ex.clone()));
            assert_ne!(t.example(1, u).unwrap(), Some(ex));
        }
        let mut r = rng::stream(0, Purpose::TrainNegatives, &[]);
        let all: HashSet<ItemId> = (1..=3).collect();
        assert!(draw_training_negatives(1, &all, 3, 1, &mut r).is_err());
    }

    #[test]
    fn modes_agree_bitwise() {
        let ds = toy();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        let mut a = Trainer::new(&sp, model(40), settings(Execution::Sequential), 5).unwrap();
        let mut b = Trainer::new(&sp, model(40), settings(Execution::Parallel), 5).unwrap();
        for e in 0..2 {
            assert_eq!(a.train_epoch(e).unwrap().to_bits(), b.train_epoch(e).unwrap().to_bits());
        }
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn loss_decreases_on_repeated_patterns() {
        let seqs = (0..30)
            .map(|u| (0..12).map(|t| ((u % 3) * 10 + t % 10 + 1) as ItemId).collect())
            .collect();
        let ds = Dataset::from_sequences(seqs, 40).unwrap();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        let mut s = settings(Execution::Parallel);
        s.adam.lr = 0.01;
        let mut t = Trainer::new(&sp, model(40), s, 2).unwrap();
        let first = t.train_epoch(0).unwrap();
        let mut last = first;
        for e in 1..15 {
            last = t.train_epoch(e).unwrap();
        }
        assert!(last < 0.7 * first, "{first} -> {last}");
    }

    #[test]
    fn rejects_mismatched_model() {
        let ds = toy();
        let sp = split(&ds, SplitSpec::leave_one_out()).unwrap();
        assert!(Trainer::new(&sp, model(39), settings(Execution::Sequential), 5).is_err());
    }
}

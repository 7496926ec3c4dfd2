//! Leave-K-out partition of user sequences into train / validation / test spans.
//!
//! With `k_test = 1, k_valid = 1` this is the classic leave-one-out protocol;
//! larger `k_test` holds out the last K items as an ordered block of future
//! items.

use crate::data::{Dataset, ItemId, UserId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub k_test: usize,
    pub k_valid: usize,
    pub min_train: usize,
}

impl SplitSpec {
    pub fn new(k_test: usize, k_valid: usize, min_train: usize) -> Result<Self> {
        let spec = SplitSpec {
            k_test,
            k_valid,
            min_train,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn leave_one_out() -> Self {
        SplitSpec {
            k_test: 1,
            k_valid: 1,
            min_train: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_test == 0 {
            return Err(Error::InvalidArgument("k_test must be >= 1".into()));
        }
        if self.min_train == 0 {
            return Err(Error::InvalidArgument("min_train must be >= 1".into()));
        }
        Ok(())
    }

    pub fn min_length(&self) -> usize {
        self.min_train + self.k_valid + self.k_test
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSplit<'a> {
    pub train: &'a [ItemId],
    pub valid: &'a [ItemId],
    pub test: &'a [ItemId],
}

impl UserSplit<'_> {
    /// Context for test-time prediction: everything before the test span.
    pub fn test_context(&self) -> Vec<ItemId> {
        let mut ctx = Vec::with_capacity(self.train.len() + self.valid.len());
        ctx.extend_from_slice(self.train);
        ctx.extend_from_slice(self.valid);
        ctx
    }
}

/// Result of [`split`]. Borrows the dataset; spans are slices into it.
#[derive(Debug, Clone)]
pub struct SplitDataset<'a> {
    dataset: &'a Dataset,
    spec: SplitSpec,
    /// Train span length per user, `None` when the user is skipped.
    train_len: Vec<Option<usize>>,
    skipped: Vec<UserId>,
}

pub fn split(dataset: &Dataset, spec: SplitSpec) -> Result<SplitDataset<'_>> {
    spec.validate()?;
    let mut train_len = Vec::with_capacity(dataset.num_users());
    let mut skipped = Vec::new();
    for u in dataset.users() {
        let n = dataset.sequence(u).len();
        if n < spec.min_length() {
            train_len.push(None);
            skipped.push(u);
        } else {
            train_len.push(Some(n - spec.k_valid - spec.k_test));
        }
    }
    Ok(SplitDataset {
        dataset,
        spec,
        train_len,
        skipped,
    })
}

impl<'a> SplitDataset<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn spec(&self) -> SplitSpec {
        self.spec
    }

    pub fn num_items(&self) -> usize {
        self.dataset.num_items()
    }

    pub fn skipped_users(&self) -> &[UserId] {
        &self.skipped
    }

    /// Users with a full train/valid/test partition, in id order.
    pub fn evaluable_users(&self) -> Vec<UserId> {
        self.dataset
            .users()
            .filter(|&u| self.train_len[u as usize - 1].is_some())
            .collect()
    }

    pub fn user(&self, user: UserId) -> Option<UserSplit<'a>> {
        let seq = self.dataset.sequence(user);
        let t = self.train_len[user as usize - 1]?;
        let v = t + self.spec.k_valid;
        Some(UserSplit {
            train: &seq[..t],
            valid: &seq[t..v],
            test: &seq[v..],
        })
    }

    /// Items a user may be trained on: the train span for evaluable users, the
    /// whole sequence for skipped ones (they never contribute to metrics).
    pub fn training_sequence(&self, user: UserId) -> &'a [ItemId] {
        match self.user(user) {
            Some(s) => s.train,
            None => self.dataset.sequence(user),
        }
    }
}

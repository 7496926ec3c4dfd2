//! Interaction-log ingestion and per-user sequence construction.
//!
//! Item id `0` is reserved for sequence padding; real items are `1..=num_items`
//! and users `1..=num_users`.

mod cache;
mod parse;
pub mod synthetic;

use std::collections::HashMap;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use parse::{parse_bytes, parse_log, Interaction, LogFormat, ParseOutcome, TimestampFormat};

use crate::{Error, Result};

pub type UserId = u32;
pub type ItemId = u32;

pub const PAD: ItemId = 0;
pub const DEFAULT_MIN_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub min_count: usize,
    pub input_events: usize,
    pub filtered_events: usize,
}

/// Per-user temporally ordered item sequences with dense id maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    sequences: Vec<Vec<ItemId>>,
    timestamps: Vec<Vec<i64>>,
    user_raw: Vec<String>,
    item_raw: Vec<String>,
    provenance: Provenance,
}

impl Dataset {
    pub fn num_users(&self) -> usize {
        self.sequences.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_raw.len()
    }

    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        1..=self.sequences.len() as UserId
    }

    /// Items of `user` in temporal order.
    pub fn sequence(&self, user: UserId) -> &[ItemId] {
        &self.sequences[user as usize - 1]
    }

    pub fn timestamps(&self, user: UserId) -> &[i64] {
        &self.timestamps[user as usize - 1]
    }

    pub fn user_raw(&self, user: UserId) -> &str {
        &self.user_raw[user as usize - 1]
    }

    pub fn item_raw(&self, item: ItemId) -> &str {
        &self.item_raw[item as usize - 1]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn set_source(&mut self, source: impl Into<String>) {
        self.provenance.source = source.into();
    }

    /// Per-item interaction counts indexed by item id (index 0 unused).
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_items() + 1];
        for seq in &self.sequences {
            for &i in seq {
                counts[i as usize] += 1;
            }
        }
        counts
    }

    /// Re-serialises the dataset as interactions: users in id order, each user's
    /// events in sequence order. Rebuilding from this output with the same
    /// `min_count` reproduces the dataset exactly.
    pub fn to_interactions(&self) -> Vec<Interaction> {
        let mut out = Vec::with_capacity(self.num_interactions());
        for u in self.users() {
            for (&item, &ts) in self.sequence(u).iter().zip(self.timestamps(u)) {
                out.push(Interaction {
                    user_raw: self.user_raw(u).to_string(),
                    item_raw: self.item_raw(item).to_string(),
                    timestamp: ts,
                    weight: None,
                });
            }
        }
        out
    }

    pub(crate) fn from_parts(
        sequences: Vec<Vec<ItemId>>,
        timestamps: Vec<Vec<i64>>,
        user_raw: Vec<String>,
        item_raw: Vec<String>,
        provenance: Provenance,
    ) -> Self {
        Dataset {
            sequences,
            timestamps,
            user_raw,
            item_raw,
            provenance,
        }
    }

    /// Builds a dataset directly from dense sequences (ids `1..=num_items`),
    /// using the position in each sequence as its timestamp. Mostly useful for
    /// tests and synthetic experiments.
    pub fn from_sequences(sequences: Vec<Vec<ItemId>>, num_items: usize) -> Result<Self> {
        for (u, seq) in sequences.iter().enumerate() {
            if let Some(&bad) = seq.iter().find(|&&i| i == PAD || i as usize > num_items) {
                return Err(Error::InvalidArgument(format!(
                    "user {} has item id {bad} outside 1..={num_items}",
                    u + 1
                )));
            }
        }
        let timestamps = sequences
            .iter()
            .map(|s| (0..s.len() as i64).collect())
            .collect();
        let user_raw = (1..=sequences.len()).map(|u| u.to_string()).collect();
        let item_raw = (1..=num_items).map(|i| i.to_string()).collect();
        let n = sequences.iter().map(Vec::len).sum();
        Ok(Dataset {
            sequences,
            timestamps,
            user_raw,
            item_raw,
            provenance: Provenance {
                source: "in-memory".into(),
                min_count: 1,
                input_events: n,
                filtered_events: 0,
            },
        })
    }
}

/// Builds per-user sequences from raw events.
///
/// Users and items with fewer than `min_count` interactions are dropped
/// alternately until both constraints hold at once. Sequences are sorted by
/// timestamp with ties kept in input order. User ids follow first appearance in
/// the input; item ids follow first appearance when walking users in id order
/// through their sorted sequences, which makes the build idempotent on its own
/// re-serialised output.
pub fn build_dataset(events: &[Interaction], min_count: usize) -> Result<Dataset> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be >= 1".into()));
    }
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut item_index: HashMap<&str, usize> = HashMap::new();
    let mut ev_user = Vec::with_capacity(events.len());
    let mut ev_item = Vec::with_capacity(events.len());
    for ev in events {
        let n = user_index.len();
        ev_user.push(*user_index.entry(ev.user_raw.as_str()).or_insert(n));
        let n = item_index.len();
        ev_item.push(*item_index.entry(ev.item_raw.as_str()).or_insert(n));
    }

    let mut alive = vec![true; events.len()];
    loop {
        let mut ucount = vec![0usize; user_index.len()];
        let mut icount = vec![0usize; item_index.len()];
        for e in 0..events.len() {
            if alive[e] {
                ucount[ev_user[e]] += 1;
                icount[ev_item[e]] += 1;
            }
        }
        let mut changed = false;
        for e in 0..events.len() {
            if alive[e] && (ucount[ev_user[e]] < min_count || icount[ev_item[e]] < min_count) {
                alive[e] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Group surviving events by user, users in order of first appearance.
    let mut dense_user = vec![usize::MAX; user_index.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for e in (0..events.len()).filter(|&e| alive[e]) {
        let u = ev_user[e];
        if dense_user[u] == usize::MAX {
            dense_user[u] = groups.len();
            groups.push(Vec::new());
        }
        groups[dense_user[u]].push(e);
    }
    if groups.is_empty() {
        return Err(Error::EmptyDataset { min_count });
    }

    let mut dense_item = vec![0 as ItemId; item_index.len()];
    let mut item_raw = Vec::new();
    let mut sequences = Vec::with_capacity(groups.len());
    let mut timestamps = Vec::with_capacity(groups.len());
    let mut user_raw = Vec::with_capacity(groups.len());
    let mut retained = 0;
    for mut group in groups {
        // stable: ties keep input order
        group.sort_by_key(|&e| events[e].timestamp);
        user_raw.push(events[group[0]].user_raw.clone());
        let mut seq = Vec::with_capacity(group.len());
        let mut ts = Vec::with_capacity(group.len());
        for e in group {
            let i = ev_item[e];
            if dense_item[i] == 0 {
                item_raw.push(events[e].item_raw.clone());
                dense_item[i] = item_raw.len() as ItemId;
            }
            seq.push(dense_item[i]);
            ts.push(events[e].timestamp);
        }
        retained += seq.len();
        sequences.push(seq);
        timestamps.push(ts);
    }

    Ok(Dataset {
        sequences,
        timestamps,
        user_raw,
        item_raw,
        provenance: Provenance {
            source: String::new(),
            min_count,
            input_events: events.len(),
            filtered_events: events.len() - retained,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(u: &str, i: &str, t: i64) -> Interaction {
        Interaction {
            user_raw: u.into(),
            item_raw: i.into(),
            timestamp: t,
            weight: None,
        }
    }

    #[test]
    fn sorts_by_timestamp() {
        let ds = build_dataset(&[ev("u", "a", 3), ev("u", "b", 1), ev("u", "c", 2)], 1).unwrap();
        let names: Vec<&str> = ds.sequence(1).iter().map(|&i| ds.item_raw(i)).collect();
        assert_eq!(names, ["b", "c", "a"]);
        assert_eq!(ds.num_items(), 3);
    }

    #[test]
    fn ties_keep_file_order() {
        let ds = build_dataset(&[ev("u", "x", 5), ev("u", "y", 5), ev("u", "z", 1)], 1).unwrap();
        let names: Vec<&str> = ds.sequence(1).iter().map(|&i| ds.item_raw(i)).collect();
        assert_eq!(names, ["z", "x", "y"]);
    }

    #[test]
    fn short_user_removed() {
        let mut events = Vec::new();
        for t in 0..4 {
            events.push(ev("short", &format!("i{t}"), t));
        }
        for u in ["a", "b", "c", "d", "e"] {
            for t in 0..5 {
                events.push(ev(u, &format!("i{t}"), t));
            }
        }
        let ds = build_dataset(&events, 5).unwrap();
        assert_eq!(ds.num_users(), 5);
        assert!(ds.users().all(|u| ds.user_raw(u) != "short"));
        assert_eq!(ds.provenance().filtered_events, 4);
    }

    #[test]
    fn filtering_reaches_fixed_point() {
        // Removing user "b" (2 events) drops item "y" below threshold, which
        // then drops user "a" below threshold too.
        let events = vec![
            ev("a", "x", 1),
            ev("a", "y", 2),
            ev("b", "y", 1),
            ev("b", "x", 2),
            ev("c", "x", 1),
            ev("c", "x", 2),
            ev("c", "x", 3),
        ];
        let ds = build_dataset(&events, 3).unwrap();
        assert_eq!(ds.num_users(), 1);
        assert_eq!(ds.user_raw(1), "c");
        assert_eq!(ds.sequence(1), &[1, 1, 1]);
    }

    #[test]
    fn everything_filtered_is_error() {
        let err = build_dataset(&[ev("u", "a", 1)], 2).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset { min_count: 2 }));
        assert!(matches!(build_dataset(&[], 1), Err(Error::EmptyDataset { .. })));
    }

    fn arb_events() -> impl Strategy<Value = Vec<Interaction>> {
        prop::collection::vec((0u8..12, 0u8..20, 0i64..30), 0..300).prop_map(|v| {
            v.into_iter()
                .map(|(u, i, t)| ev(&format!("u{u}"), &format!("i{i}"), t))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn invariants_hold(events in arb_events(), min_count in 1usize..5) {
            let Ok(ds) = build_dataset(&events, min_count) else { return Ok(()); };
            // conservation
            prop_assert_eq!(ds.num_interactions() + ds.provenance().filtered_events, events.len());
            let counts = ds.item_counts();
            for u in ds.users() {
                let seq = ds.sequence(u);
                prop_assert!(seq.len() >= min_count);
                prop_assert!(ds.timestamps(u).windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(seq.iter().all(|&i| i >= 1 && i as usize <= ds.num_items()));
            }
            prop_assert!(counts[1..].iter().all(|&c| c as usize >= min_count));
            // idempotence on re-serialised output
            let again = build_dataset(&ds.to_interactions(), min_count).unwrap();
            prop_assert_eq!(&again.sequences, &ds.sequences);
            prop_assert_eq!(&again.user_raw, &ds.user_raw);
            prop_assert_eq!(&again.item_raw, &ds.item_raw);
            // determinism
            let twice = build_dataset(&events, min_count).unwrap();
            prop_assert_eq!(twice, ds);
        }
    }
}

//! Synthetic interaction logs with learnable sequential structure.
//!
//! Items are grouped into contiguous clusters. A user walks through a cluster
//! mostly in order (next item is the following one, sometimes skipping one) and
//! occasionally jumps to a random cluster. Jumps favour low-numbered clusters,
//! giving a skewed popularity profile.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::Interaction;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_clusters: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of continuing along the current cluster.
    pub p_follow: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_users: 200,
            num_items: 300,
            num_clusters: 15,
            min_len: 20,
            max_len: 60,
            p_follow: 0.8,
            seed: 7,
        }
    }
}

/// Generates events in global timestamp order (users interleaved), as a real
/// log would be.
pub fn generate(cfg: &SyntheticConfig) -> Vec<Interaction> {
    let cluster_size = (cfg.num_items / cfg.num_clusters.max(1)).max(1);
    let num_clusters = (cfg.num_items / cluster_size).max(1);
    let mut events = Vec::new();
    for u in 0..cfg.num_users {
        let mut r = rng::stream(cfg.seed, Purpose::Synthetic, &[u as u64]);
        let len = r.random_range(cfg.min_len..=cfg.max_len.max(cfg.min_len));
        let jump = |r: &mut rand_chacha::ChaCha8Rng| {
            // squared uniform skews towards cluster 0
            let c = ((r.random::<f64>().powi(2)) * num_clusters as f64) as usize;
            let c = c.min(num_clusters - 1);
            c * cluster_size + r.random_range(0..cluster_size)
        };
        let mut cur = jump(&mut r);
        let mut t: i64 = 1_000_000 + r.random_range(0..10_000);
        for _ in 0..len {
            events.push((
                t,
                u,
                Interaction {
                    user_raw: format!("{}", u + 1),
                    item_raw: format!("{}", cur + 1),
                    timestamp: t,
                    weight: Some(f64::from(r.random_range(1u8..=5))),
                },
            ));
            t += r.random_range(0..600);
            cur = if r.random_bool(cfg.p_follow) {
                let cluster = cur / cluster_size;
                let step = if r.random_bool(0.8) { 1 } else { 2 };
                cluster * cluster_size + (cur % cluster_size + step) % cluster_size
            } else {
                jump(&mut r)
            };
        }
    }
    events.sort_by_key(|(t, u, _)| (*t, *u));
    events.into_iter().map(|(_, _, e)| e).collect()
}

/// Writes events in the tab-separated `user item rating timestamp` layout.
pub fn write_tsv(events: &[Interaction], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for e in events {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            e.user_raw,
            e.item_raw,
            e.weight.unwrap_or(1.0),
            e.timestamp
        )
        .expect("write to Vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

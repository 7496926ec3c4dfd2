//! Item relevance profiles over K ordered future items.
//!
//! A profile assigns a weight to each of the next K items (index 0 is the
//! temporally nearest). Weights are non-negative, sum to one, and never
//! increase with distance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceKind {
    /// `r(i) = 1`
    Fixed,
    /// `r(i) = K - i`
    Linear,
    /// `r(i) = (K - i)^2`
    Power,
    /// `r(i) = e^(K - i)`
    #[serde(rename = "exp")]
    Exponential,
}

impl RelevanceKind {
    pub const ALL: [RelevanceKind; 4] = [
        RelevanceKind::Fixed,
        RelevanceKind::Linear,
        RelevanceKind::Power,
        RelevanceKind::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelevanceKind::Fixed => "fixed",
            RelevanceKind::Linear => "linear",
            RelevanceKind::Power => "power",
            RelevanceKind::Exponential => "exp",
        }
    }
}

impl fmt::Display for RelevanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelevanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(RelevanceKind::Fixed),
            "linear" => Ok(RelevanceKind::Linear),
            "power" => Ok(RelevanceKind::Power),
            "exp" | "exponential" => Ok(RelevanceKind::Exponential),
            other => Err(Error::InvalidArgument(format!(
                "unknown relevance kind {other:?} (expected fixed|linear|power|exp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceProfile {
    weights: Vec<f64>,
}

impl RelevanceProfile {
    /// Evaluates the kind's formula for `i = 1..=k` and normalises to sum one.
    ///
    /// Linear and Power are identically zero at `k = 1`; that case falls back to
    /// the single weight `1.0`, so every kind reduces to the single-positive
    /// setting when only one future item is considered.
    pub fn new(kind: RelevanceKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("relevance profile needs k >= 1".into()));
        }
        let raw: Vec<f64> = (1..=k)
            .map(|i| {
                let d = (k - i) as f64;
                match kind {
                    RelevanceKind::Fixed => 1.0,
                    RelevanceKind::Linear => d,
                    RelevanceKind::Power => d * d,
                    // shifted by the largest exponent (K - 1); cancels in the normalisation
                    RelevanceKind::Exponential => (d - (k - 1) as f64).exp(),
                }
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Ok(Self::uniform(k));
        }
        Ok(RelevanceProfile {
            weights: raw.into_iter().map(|r| r / sum).collect(),
        })
    }

    pub fn uniform(k: usize) -> Self {
        RelevanceProfile {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Profile from explicit weights; they must already satisfy the profile
    /// invariants.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let p = RelevanceProfile { weights };
        p.check()?;
        Ok(p)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The same weights in reverse order (most distant item weighted most).
    pub fn reversed(&self) -> Vec<f64> {
        self.weights.iter().rev().copied().collect()
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("relevance profile: {m}")));
        if self.weights.is_empty() {
            return bad("empty".into());
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return bad(format!("weight {w} outside [0, 1]"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {sum}"));
        }
        if self.weights.windows(2).any(|w| w[1] > w[0]) {
            return bad("weights increase with distance".into());
        }
        Ok(())
    }
}

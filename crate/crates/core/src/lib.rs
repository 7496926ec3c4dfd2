//! Training and evaluation workbench for self-attentive sequential recommenders.
//!
//! The crate covers the whole pipeline: interaction-log ingestion ([`data`]),
//! leave-K-out splitting ([`split`]), item relevance profiles ([`relevance`]),
//! a self-attentive next-item model with its own reverse-mode gradients
//! ([`model`]), the relevance-weighted multi-positive loss ([`loss`]),
//! sampled-candidate ranking metrics for single- and multi-future-item
//! protocols ([`eval`]), and the experiment runner ([`experiments`]).
//!
//! Per-user work (gradient computation inside a batch, evaluation) runs through
//! [`exec`], which uses rayon when the `parallel` feature is enabled and falls
//! back to plain iteration otherwise. Reductions always happen in a fixed order,
//! so both paths produce bit-identical results.

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiments;
pub mod loss;
pub mod model;
pub mod relevance;
pub mod rng;
pub mod split;

pub use error::{Error, Result};

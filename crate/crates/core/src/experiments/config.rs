//! Run configuration and its flat `key = value` text form.
//!
//! Keys are the long CLI flag names without the leading dashes. Lines starting
//! with `#` and blank lines are ignored. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{LogFormat, DEFAULT_MIN_COUNT};
use crate::eval::{GainMode, HitMode, MetricOptions, DEFAULT_CUTOFF, DEFAULT_NEGATIVES};
use crate::exec::Execution;
use crate::loss::Orientation;
use crate::model::ModelConfig;
use crate::relevance::RelevanceKind;
use crate::{Error, Result};

/// Train-positive counts of the training-positives ablation.
pub const TRAIN_POSITIVES_GRID: [usize; 5] = [2, 3, 4, 5, 10];
/// Evaluation-positive counts of the evaluation-positives ablation.
pub const EVAL_POSITIVES_GRID: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// A [`LogFormat`] descriptor, or `cache` for a file written by `ingest`.
    pub format: String,
    pub dataset_name: Option<String>,
    pub min_count: usize,

    pub relevance: RelevanceKind,
    pub train_positives: usize,
    /// Negatives at the final position; defaults to the number of positives.
    pub negatives: Option<usize>,
    pub orientation: Orientation,

    pub eval_positives: Vec<usize>,
    /// Test span length; defaults to the largest evaluation-positive count.
    pub split_k: Option<usize>,
    pub valid_items: usize,
    pub min_train: usize,
    pub cutoff: usize,
    pub eval_negatives: usize,
    pub gain: GainMode,
    pub hit: HitMode,

    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement; 0 disables.
    pub patience: usize,
    pub eval_every: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,

    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub max_len: usize,
    pub dropout: f64,

    pub output: PathBuf,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::new(),
            format: "ml-100k".into(),
            dataset_name: None,
            min_count: DEFAULT_MIN_COUNT,
            relevance: RelevanceKind::Linear,
            train_positives: 1,
            negatives: None,
            orientation: Orientation::NearestFirst,
            eval_positives: vec![1],
            split_k: None,
            valid_items: 1,
            min_train: 1,
            cutoff: DEFAULT_CUTOFF,
            eval_negatives: DEFAULT_NEGATIVES,
            gain: GainMode::Graded,
            hit: HitMode::Recall,
            epochs: 200,
            patience: 20,
            eval_every: 1,
            batch_size: 128,
            lr: 0.001,
            seeds: vec![42],
            hidden_dim: 50,
            num_blocks: 2,
            num_heads: 1,
            max_len: 50,
            dropout: 0.2,
            output: PathBuf::from("."),
            sequential: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::InvalidConfig(format!("{key}: {s:?}: {e}")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| Error::InvalidConfig(format!("{key}: {v:?}: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::InvalidConfig(format!("{key}: expected a boolean, got {other:?}"))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses `key = value` lines.
    pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", n + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply(&Self::parse_kv(&text)?)?;
        Ok(cfg)
    }

    /// Overwrites fields from a key/value map (later layers win, so apply the
    /// file first and CLI flags second).
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            let key = k.as_str();
            match key {
                "dataset" => self.dataset = PathBuf::from(v),
                "format" => self.format = v.clone(),
                "dataset-name" => self.dataset_name = (!v.is_empty()).then(|| v.clone()),
                "min-count" => self.min_count = parse_one(key, v)?,
                "relevance" => self.relevance = v.parse()?,
                "train-positives" => self.train_positives = parse_one(key, v)?,
                "negatives" => {
                    self.negatives = match v.as_str() {
                        "" | "auto" => None,
                        _ => Some(parse_one(key, v)?),
                    }
                }
                "orientation" => {
                    self.orientation = match v.as_str() {
                        "nearest-first" => Orientation::NearestFirst,
                        "reversed" => Orientation::Reversed,
                        other => {
                            return Err(Error::InvalidConfig(format!(
                                "orientation: {other:?} (expected nearest-first|reversed)"
                            )))
                        }
                    }
                }
                "eval-positives" => self.eval_positives = parse_list(key, v)?,
                "split-k" => {
                    self.split_k = match v.as_str() {
                        "" | "auto" => None,
                        _ => Some(parse_one(key, v)?),
                    }
                }
                "valid-items" => self.valid_items = parse_one(key, v)?,
                "min-train" => self.min_train = parse_one(key, v)?,
                "cutoff" => self.cutoff = parse_one(key, v)?,
                "eval-negatives" => self.eval_negatives = parse_one(key, v)?,
                "gain" => {
                    self.gain = match v.as_str() {
                        "graded" => GainMode::Graded,
                        "binary" => GainMode::Binary,
                        other => return Err(Error::InvalidConfig(format!("gain: {other:?}"))),
                    }
                }
                "hit" => {
                    self.hit = match v.as_str() {
                        "recall" => HitMode::Recall,
                        "any-hit" => HitMode::AnyHit,
                        other => return Err(Error::InvalidConfig(format!("hit: {other:?}"))),
                    }
                }
                "epochs" => self.epochs = parse_one(key, v)?,
                "patience" => self.patience = parse_one(key, v)?,
                "eval-every" => self.eval_every = parse_one(key, v)?,
                "batch-size" => self.batch_size = parse_one(key, v)?,
                "lr" => self.lr = parse_one(key, v)?,
                "seeds" => self.seeds = parse_list(key, v)?,
                "hidden-dim" => self.hidden_dim = parse_one(key, v)?,
                "blocks" => self.num_blocks = parse_one(key, v)?,
                "heads" => self.num_heads = parse_one(key, v)?,
                "max-len" => self.max_len = parse_one(key, v)?,
                "dropout" => self.dropout = parse_one(key, v)?,
                "output" => self.output = PathBuf::from(v),
                "sequential" => self.sequential = parse_bool(key, v)?,
                other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    /// Canonical text form; [`RunConfig::apply`] on its parse reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("write to String");
        };
        kv("dataset", self.dataset.display().to_string());
        kv("format", self.format.clone());
        kv("dataset-name", self.dataset_name.clone().unwrap_or_default());
        kv("min-count", self.min_count.to_string());
        kv("relevance", self.relevance.to_string());
        kv("train-positives", self.train_positives.to_string());
        kv(
            "negatives",
            self.negatives.map_or("auto".into(), |n| n.to_string()),
        );
        kv(
            "orientation",
            match self.orientation {
                Orientation::NearestFirst => "nearest-first",
                Orientation::Reversed => "reversed",
            }
            .into(),
        );
        kv("eval-positives", join(&self.eval_positives));
        kv("split-k", self.split_k.map_or("auto".into(), |n| n.to_string()));
        kv("valid-items", self.valid_items.to_string());
        kv("min-train", self.min_train.to_string());
        kv("cutoff", self.cutoff.to_string());
        kv("eval-negatives", self.eval_negatives.to_string());
        kv(
            "gain",
            match self.gain {
                GainMode::Graded => "graded",
                GainMode::Binary => "binary",
            }
            .into(),
        );
        kv(
            "hit",
            match self.hit {
                HitMode::Recall => "recall",
                HitMode::AnyHit => "any-hit",
            }
            .into(),
        );
        kv("epochs", self.epochs.to_string());
        kv("patience", self.patience.to_string());
        kv("eval-every", self.eval_every.to_string());
        kv("batch-size", self.batch_size.to_string());
        kv("lr", self.lr.to_string());
        kv("seeds", join(&self.seeds));
        kv("hidden-dim", self.hidden_dim.to_string());
        kv("blocks", self.num_blocks.to_string());
        kv("heads", self.num_heads.to_string());
        kv("max-len", self.max_len.to_string());
        kv("dropout", self.dropout.to_string());
        kv("output", self.output.display().to_string());
        kv("sequential", self.sequential.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.eval_positives.is_empty() || self.eval_positives.contains(&0) {
            return bad("eval-positives must be a non-empty list of values >= 1");
        }
        if self.train_positives == 0 {
            return bad("train-positives must be >= 1");
        }
        if self.negatives == Some(0) {
            return bad("negatives must be >= 1");
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch-size and eval-every must be >= 1");
        }
        if self.cutoff == 0 {
            return bad("cutoff must be >= 1");
        }
        if self.min_train == 0 {
            return bad("min-train must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.split_k() < self.max_eval_positives() {
            return bad("split-k is smaller than the largest eval-positives value");
        }
        if self.format != "cache" {
            self.format.parse::<LogFormat>()?;
        }
        self.model_config(1, 0).validate()
    }

    pub fn max_eval_positives(&self) -> usize {
        self.eval_positives.iter().copied().max().unwrap_or(1)
    }

    pub fn split_k(&self) -> usize {
        self.split_k.unwrap_or_else(|| self.max_eval_positives())
    }

    pub fn negatives_at_final(&self, positives: usize) -> usize {
        self.negatives.unwrap_or(positives)
    }

    pub fn model_config(&self, num_items: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            hidden_dim: self.hidden_dim,
            num_blocks: self.num_blocks,
            num_heads: self.num_heads,
            max_len: self.max_len,
            dropout_rate: self.dropout,
            num_items,
            seed,
        }
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            cutoff: self.cutoff,
            gain: self.gain,
            hit: self.hit,
        }
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// `baseline` for single-positive training, otherwise the relevance kind.
    pub fn model_label(&self) -> String {
        if self.train_positives == 1 {
            "baseline".into()
        } else {
            self.relevance.to_string()
        }
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!(
            "{}-{}-tp{}-s{}",
            self.dataset_label(),
            self.model_label(),
            self.train_positives,
            seed
        )
    }

    /// The same configuration restricted to one seed.
    pub fn for_seed(&self, seed: u64) -> Self {
        RunConfig {
            seeds: vec![seed],
            ..self.clone()
        }
    }
}

/// Named configuration sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Baseline (one positive) plus each relevance kind at the configured
    /// number of training positives.
    Models,
    /// The configured relevance kind at each of [`TRAIN_POSITIVES_GRID`].
    TrainPositives,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "models" => Ok(Sweep::Models),
            "train-positives" => Ok(Sweep::TrainPositives),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep {other:?} (expected models|train-positives)"
            ))),
        }
    }
}

impl Sweep {
    pub fn expand(self, base: &RunConfig) -> Result<Vec<RunConfig>> {
        match self {
            Sweep::Models => {
                if base.train_positives < 2 {
                    return Err(Error::InvalidConfig(
                        "the models sweep needs train-positives >= 2 for the relevance kinds".into(),
                    ));
                }
                let mut out = vec![RunConfig {
                    train_positives: 1,
                    relevance: RelevanceKind::Fixed,
                    ..base.clone()
                }];
                out.extend(RelevanceKind::ALL.iter().map(|&k| RunConfig {
                    relevance: k,
                    ..base.clone()
                }));
                Ok(out)
            }
            Sweep::TrainPositives => Ok(TRAIN_POSITIVES_GRID
                .iter()
                .map(|&p| RunConfig {
                    train_positives: p,
                    ..base.clone()
                })
                .collect()),
        }
    }
}

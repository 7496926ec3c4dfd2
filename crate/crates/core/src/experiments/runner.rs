//! Training runs: per-epoch evaluation, CSV and JSON outputs, checkpointing,
//! resume and early stopping.
//!
//! A run writes `<output>/runs/<run_id>/` containing `config.txt`, `epochs.csv`,
//! `summary.json`, `model.ckpt` (latest epoch) and `best.ckpt` (best
//! validation epoch).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::train::{TrainSettings, Trainer};
use crate::data::{build_dataset, parse_log, read_cache, Dataset};
use crate::eval::{evaluate_cases, prepare_cases, CaseSet, MetricRecord, Stage};
use crate::model::{read_checkpoint, write_checkpoint, AdamConfig, Checkpoint, ModelParams};
use crate::split::{split, SplitDataset, SplitSpec};
use crate::{Error, Result};

pub const EPOCHS_CSV_HEADER: [&str; 10] = [
    "run_id", "dataset", "relevance", "train_pos", "eval_pos", "epoch", "ndcg", "hr", "users",
    "skipped",
];

/// One `epochs.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub run_id: String,
    pub dataset: String,
    pub relevance: String,
    pub train_pos: usize,
    pub eval_pos: usize,
    pub epoch: u32,
    pub ndcg: f64,
    pub hr: f64,
    pub users: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub dataset: String,
    pub model: String,
    pub relevance: String,
    pub train_positives: usize,
    pub seed: u64,
    pub cutoff: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub num_interactions: usize,
    pub epochs_run: u32,
    pub stopped_early: bool,
    /// Epoch whose test metrics are reported (best validation NDCG, or the last
    /// evaluated epoch without a validation span).
    pub best_epoch: u32,
    pub best_valid_ndcg: Option<f64>,
    pub test: Vec<MetricRecord>,
    pub final_test: Vec<MetricRecord>,
    pub losses: Vec<f64>,
}

/// State stored inside the checkpoint for resuming.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RunState {
    best_epoch: u32,
    best_valid: Option<f64>,
    stale: usize,
    stopped_early: bool,
    best_test: Vec<MetricRecord>,
    last_test: Vec<MetricRecord>,
    losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue from an existing checkpoint with a compatible configuration.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { resume: true }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Loads a raw log (filtered at `min-count`) or a cache written by `ingest`.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if cfg.format == "cache" {
        return read_cache(&cfg.dataset);
    }
    let fmt = cfg.format.parse()?;
    let parsed = parse_log(&cfg.dataset, &fmt, false)?;
    let mut ds = build_dataset(&parsed.interactions, cfg.min_count)?;
    ds.set_source(cfg.dataset.display().to_string());
    Ok(ds)
}

pub fn split_for<'d>(cfg: &RunConfig, ds: &'d Dataset) -> Result<SplitDataset<'d>> {
    split(ds, SplitSpec::new(cfg.split_k(), cfg.valid_items, cfg.min_train)?)
}

pub fn run_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    cfg.output.join("runs").join(cfg.run_id(seed))
}

/// Keys that may change between a run and its resumption.
const RESUMABLE_KEYS: [&str; 4] = ["epochs", "patience", "sequential", "output"];

fn compatible(a: &str, b: &str) -> Result<bool> {
    let strip = |t: &str| -> Result<BTreeMap<String, String>> {
        let mut m = RunConfig::parse_kv(t)?;
        for k in RESUMABLE_KEYS {
            m.remove(k);
        }
        Ok(m)
    };
    Ok(strip(a)? == strip(b)?)
}

fn write_rows(path: &Path, rows: &[EpochRow], append: bool) -> Result<()> {
    let exists = append && path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if !exists {
        w.write_record(EPOCHS_CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_epoch_rows(path: &Path) -> Result<Vec<EpochRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    run_id: String,
    valid: Option<CaseSet>,
    test: CaseSet,
}

impl Ctx<'_> {
    fn rows(&self, epoch: u32, records: &[MetricRecord]) -> Vec<EpochRow> {
        records
            .iter()
            .map(|m| EpochRow {
                run_id: self.run_id.clone(),
                dataset: self.cfg.dataset_label(),
                relevance: self.cfg.model_label(),
                train_pos: self.cfg.train_positives,
                eval_pos: m.k_eval,
                epoch,
                ndcg: m.ndcg_at_k,
                hr: m.hr_at_k,
                users: m.num_users_evaluated,
                skipped: m.num_users_skipped,
            })
            .collect()
    }

    fn summary(&self, ds: &Dataset, epochs_run: u32, st: &RunState) -> RunSummary {
        RunSummary {
            run_id: self.run_id.clone(),
            dataset: self.cfg.dataset_label(),
            model: self.cfg.model_label(),
            relevance: self.cfg.relevance.to_string(),
            train_positives: self.cfg.train_positives,
            seed: self.seed,
            cutoff: self.cfg.cutoff,
            num_users: ds.num_users(),
            num_items: ds.num_items(),
            num_interactions: ds.num_interactions(),
            epochs_run,
            stopped_early: st.stopped_early,
            best_epoch: st.best_epoch,
            best_valid_ndcg: st.best_valid,
            test: st.best_test.clone(),
            final_test: st.last_test.clone(),
            losses: st.losses.clone(),
        }
    }
}

/// Trains one seed of `cfg` on `ds`.
pub fn run_seed(cfg: &RunConfig, seed: u64, ds: &Dataset, opts: RunOptions) -> Result<RunOutcome> {
    let cfg = &cfg.for_seed(seed);
    cfg.validate()?;
    let mode = cfg.execution();
    let sp = split_for(cfg, ds)?;
    let dir = run_dir(cfg, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (config_path, csv_path, ckpt_path, best_path, summary_path) = (
        dir.join("config.txt"),
        dir.join("epochs.csv"),
        dir.join("model.ckpt"),
        dir.join("best.ckpt"),
        dir.join("summary.json"),
    );

    let ctx = Ctx {
        cfg,
        seed,
        run_id: cfg.run_id(seed),
        valid: if cfg.valid_items > 0 {
            Some(prepare_cases(&sp, Stage::Valid, cfg.eval_negatives, seed, mode)?)
        } else {
            None
        },
        test: prepare_cases(&sp, Stage::Test, cfg.eval_negatives, seed, mode)?,
    };
    let settings = TrainSettings {
        relevance: cfg.relevance,
        positives: cfg.train_positives,
        negatives: cfg.negatives,
        orientation: cfg.orientation,
        batch_size: cfg.batch_size,
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        mode,
    };
    let params = ModelParams::init(&cfg.model_config(ds.num_items(), seed))?;
    let mut trainer = Trainer::new(&sp, params, settings, seed)?;

    let config_text = cfg.to_text();
    let mut state = RunState::default();
    let mut start = 0u32;
    let previous = fs::read_to_string(&config_path).ok();
    let can_resume = opts.resume
        && ckpt_path.exists()
        && previous.as_deref().map(|p| compatible(p, &config_text)).transpose()?.unwrap_or(false);
    if can_resume {
        let ck = read_checkpoint(&ckpt_path)?;
        let adam = ck.optimizer.ok_or_else(|| Error::Format {
            path: ckpt_path.clone(),
            reason: "checkpoint has no optimizer state".into(),
        })?;
        trainer.set_state(ck.params, adam)?;
        state = serde_json::from_str(&ck.state)?;
        start = ck.epoch;
        let kept: Vec<EpochRow> = if csv_path.exists() {
            read_epoch_rows(&csv_path)?
                .into_iter()
                .filter(|r| r.epoch <= start)
                .collect()
        } else {
            Vec::new()
        };
        write_rows(&csv_path, &kept, false)?;
    } else {
        write_rows(&csv_path, &[], false)?;
        let _ = fs::remove_file(&best_path);
    }
    fs::write(&config_path, &config_text).map_err(|e| Error::io(&config_path, e))?;

    let k_evals = &cfg.eval_positives;
    let metric_opts = cfg.metric_options();
    let mut epoch = start;
    while (epoch as usize) < cfg.epochs && !state.stopped_early {
        epoch += 1;
        let loss = trainer.train_epoch(epoch)?;
        state.losses.push(loss);
        let evaluate_now = (epoch as usize).is_multiple_of(cfg.eval_every) || epoch as usize == cfg.epochs;
        if evaluate_now {
            let test = evaluate_cases(trainer.params(), &ctx.test, k_evals, metric_opts, mode)?;
            write_rows(&csv_path, &ctx.rows(epoch, &test), true)?;
            let improved = match &ctx.valid {
                Some(valid) => {
                    let v = evaluate_cases(trainer.params(), valid, &[cfg.valid_items], metric_opts, mode)?[0]
                        .ndcg_at_k;
                    let better = state.best_valid.is_none_or(|b| v > b);
                    if better {
                        state.best_valid = Some(v);
                    }
                    better
                }
                None => true,
            };
            if improved {
                state.best_epoch = epoch;
                state.best_test = test.clone();
                state.stale = 0;
                write_checkpoint(
                    &Checkpoint {
                        params: trainer.params().clone(),
                        epoch,
                        optimizer: None,
                        state: String::new(),
                    },
                    &best_path,
                )?;
            } else {
                state.stale += cfg.eval_every;
            }
            state.last_test = test;
            if cfg.patience > 0 && state.stale >= cfg.patience {
                state.stopped_early = true;
            }
        }
        write_checkpoint(
            &Checkpoint {
                params: trainer.params().clone(),
                epoch,
                optimizer: Some(trainer.adam().clone()),
                state: serde_json::to_string(&state)?,
            },
            &ckpt_path,
        )?;
    }
    let summary = ctx.summary(ds, epoch, &state);
    write_json(&summary, &summary_path)?;
    Ok(RunOutcome { dir, summary })
}

/// Loads the dataset once and trains every seed.
pub fn run(cfg: &RunConfig, opts: RunOptions) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    cfg.seeds.iter().map(|&s| run_seed(cfg, s, &ds, opts)).collect()
}

/// Runs several configurations, reusing loaded datasets.
pub fn run_many(cfgs: &[RunConfig], opts: RunOptions) -> Result<Vec<RunOutcome>> {
    let mut loaded: Vec<((PathBuf, String, usize), Dataset)> = Vec::new();
    let mut out = Vec::new();
    for cfg in cfgs {
        cfg.validate()?;
        let key = (cfg.dataset.clone(), cfg.format.clone(), cfg.min_count);
        let idx = match loaded.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                loaded.push((key, load_dataset(cfg)?));
                loaded.len() - 1
            }
        };
        for &s in &cfg.seeds {
            out.push(run_seed(cfg, s, &loaded[idx].1, opts)?);
        }
    }
    Ok(out)
}

/// Evaluates a checkpoint on the test span of `cfg`'s dataset, using the
/// negatives of `cfg`'s first seed.
pub fn evaluate_checkpoint(cfg: &RunConfig, ckpt: &Path) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let ck = read_checkpoint(ckpt)?;
    let ds = load_dataset(cfg)?;
    if ck.params.config().num_items != ds.num_items() {
        return Err(Error::InvalidConfig(format!(
            "checkpoint has {} items, dataset has {}",
            ck.params.config().num_items,
            ds.num_items()
        )));
    }
    let mode = cfg.execution();
    let sp = split_for(cfg, &ds)?;
    let set = prepare_cases(&sp, Stage::Test, cfg.eval_negatives, cfg.seeds[0], mode)?;
    evaluate_cases(&ck.params, &set, &cfg.eval_positives, cfg.metric_options(), mode)
}

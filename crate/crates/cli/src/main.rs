//! `seqrel` command-line interface.
//!
//! Settings are layered: built-in defaults, then `--config FILE` (flat
//! `key = value`), then `SEQREL_OUTPUT_ROOT`, then command-line flags. On
//! failure a single line `error: kind=<kind> msg=<message>` goes to stderr and
//! the exit status is nonzero (1 for runtime errors, 2 for usage errors).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use seqrel::data::{self, synthetic, LogFormat};
use seqrel::experiments::{self, RunConfig, RunOptions, Sweep};

const OUTPUT_ENV: &str = "SEQREL_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "seqrel", version, about = "Sequential recommendation with multi-item relevance targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more models and write per-run outputs.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Expand the configuration into a sweep (models | train-positives).
        #[arg(long)]
        sweep: Option<String>,
        /// Start from scratch even if a compatible checkpoint exists.
        #[arg(long)]
        no_resume: bool,
    },
    /// Evaluate a checkpoint on the test span.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to evaluate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run directory; supplies config.txt and best.ckpt unless overridden.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Aggregate finished runs into a table and epoch curves.
    Report {
        /// Directory holding runs/ (defaults to the output root).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, env = OUTPUT_ENV, hide_env_values = true)]
        output: Option<PathBuf>,
    },
    /// Parse and filter an interaction log into a dataset cache file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Log layout: ml-100k | ml-1m | foursquare | a descriptor string.
        #[arg(long, default_value = "ml-100k")]
        format: String,
        #[arg(long, default_value_t = data::DEFAULT_MIN_COUNT)]
        min_count: usize,
        /// Cache file to write.
        #[arg(long)]
        output: PathBuf,
        /// Fail on the first malformed line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Write a synthetic interaction log in the ML-100K layout.
    Synthetic {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 300)]
        items: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    dataset_name: Option<String>,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long, value_parser = ["fixed", "linear", "power", "exp", "exponential"])]
    relevance: Option<String>,
    #[arg(long)]
    train_positives: Option<usize>,
    /// Negatives at the final position (default: number of positives).
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long, value_parser = ["nearest-first", "reversed"])]
    orientation: Option<String>,
    /// Comma-separated evaluation-positive counts, e.g. 1,5,10.
    #[arg(long)]
    eval_positives: Option<String>,
    #[arg(long)]
    split_k: Option<usize>,
    #[arg(long)]
    valid_items: Option<usize>,
    #[arg(long)]
    min_train: Option<usize>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    eval_negatives: Option<usize>,
    #[arg(long, value_parser = ["graded", "binary"])]
    gain: Option<String>,
    #[arg(long, value_parser = ["recall", "any-hit"])]
    hit: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Output root; runs go to <output>/runs/<run_id>/.
    #[arg(long, env = OUTPUT_ENV, hide_env_values = true)]
    output: Option<String>,
    /// Disable data-parallel execution.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let s = |v: &Option<usize>| v.map(|x| x.to_string());
        put("dataset", self.dataset.clone());
        put("format", self.format.clone());
        put("dataset-name", self.dataset_name.clone());
        put("min-count", s(&self.min_count));
        put("relevance", self.relevance.clone());
        put("train-positives", s(&self.train_positives));
        put("negatives", s(&self.negatives));
        put("orientation", self.orientation.clone());
        put("eval-positives", self.eval_positives.clone());
        put("split-k", s(&self.split_k));
        put("valid-items", s(&self.valid_items));
        put("min-train", s(&self.min_train));
        put("cutoff", s(&self.cutoff));
        put("eval-negatives", s(&self.eval_negatives));
        put("gain", self.gain.clone());
        put("hit", self.hit.clone());
        put("epochs", s(&self.epochs));
        put("patience", s(&self.patience));
        put("eval-every", s(&self.eval_every));
        put("batch-size", s(&self.batch_size));
        put("lr", self.lr.map(|x| x.to_string()));
        put("seeds", self.seeds.clone());
        put("hidden-dim", s(&self.hidden_dim));
        put("blocks", s(&self.blocks));
        put("heads", s(&self.heads));
        put("max-len", s(&self.max_len));
        put("dropout", self.dropout.map(|x| x.to_string()));
        put("output", self.output.clone());
        if self.sequential {
            put("sequential", Some("true".into()));
        }
        m
    }

    fn resolve(&self, base: Option<PathBuf>) -> Result<RunConfig> {
        let file = self.config.clone().or(base);
        let mut cfg = match &file {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides())?;
        if cfg.dataset.as_os_str().is_empty() {
            return Err(seqrel::Error::InvalidConfig("no dataset given (--dataset or config)".into()).into());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_metric(m: &seqrel::eval::MetricRecord) -> String {
    format!(
        "protocol={} k_eval={} ndcg@{c}={:.6} hr@{c}={:.6} users={} skipped={}",
        m.protocol,
        m.k_eval,
        m.ndcg_at_k,
        m.hr_at_k,
        m.num_users_evaluated,
        m.num_users_skipped,
        c = m.cutoff
    )
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { run, sweep, no_resume } => {
            let cfg = run.resolve(None)?;
            let cfgs = match sweep {
                Some(s) => s.parse::<Sweep>()?.expand(&cfg)?,
                None => vec![cfg],
            };
            let opts = RunOptions { resume: !no_resume };
            for out in experiments::run_many(&cfgs, opts)? {
                let s = &out.summary;
                for m in &s.test {
                    println!(
                        "run_id={} best_epoch={} epochs_run={} {}",
                        s.run_id,
                        s.best_epoch,
                        s.epochs_run,
                        fmt_metric(m)
                    );
                }
            }
        }
        Command::Evaluate {
            run,
            checkpoint,
            run_dir,
        } => {
            let cfg = run.resolve(run_dir.as_ref().map(|d| d.join("config.txt")))?;
            let ckpt = checkpoint
                .or_else(|| run_dir.as_ref().map(|d| d.join("best.ckpt")))
                .context("no checkpoint given (--checkpoint or --run-dir)")?;
            for m in experiments::evaluate_checkpoint(&cfg, &ckpt)? {
                println!("{}", serde_json::to_string(&m)?);
            }
        }
        Command::Report { dir, output } => {
            let root = dir.or(output).unwrap_or_else(|| PathBuf::from("."));
            let report = experiments::build_report(&root)?;
            report.write(&root)?;
            print!("{}", report.table());
        }
        Command::Ingest {
            input,
            format,
            min_count,
            output,
            strict,
        } => {
            let fmt: LogFormat = format.parse()?;
            let parsed = data::parse_log(&input, &fmt, strict)?;
            let mut ds = data::build_dataset(&parsed.interactions, min_count)?;
            ds.set_source(input.display().to_string());
            data::write_cache(&ds, &output)?;
            println!(
                "users={} items={} interactions={} input_events={} malformed={} cache={}",
                ds.num_users(),
                ds.num_items(),
                ds.num_interactions(),
                parsed.interactions.len(),
                parsed.malformed,
                output.display()
            );
        }
        Command::Synthetic {
            output,
            users,
            items,
            seed,
        } => {
            let events = synthetic::generate(&synthetic::SyntheticConfig {
                num_users: users,
                num_items: items,
                seed,
                ..Default::default()
            });
            synthetic::write_tsv(&events, &output)?;
            println!("events={} path={}", events.len(), output.display());
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, msg) = match e.downcast_ref::<seqrel::Error>() {
                Some(inner) => (inner.kind(), inner.to_string()),
                None => ("cli", format!("{e:#}")),
            };
            eprintln!("error: kind={kind} msg={}", one_line(&msg));
            ExitCode::from(1)
        }
    }
}

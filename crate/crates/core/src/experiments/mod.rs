//! Experiment orchestration: configuration, training runs and reports.

pub mod config;
pub mod report;
pub mod runner;
pub mod train;

pub use config::{RunConfig, Sweep, EVAL_POSITIVES_GRID, TRAIN_POSITIVES_GRID};
pub use report::{build_report, Report};
pub use runner::{
    evaluate_checkpoint, load_dataset, read_epoch_rows, run, run_dir, run_many, run_seed, split_for,
    EpochRow, RunOptions, RunOutcome, RunSummary,
};
pub use train::{TrainSettings, Trainer};

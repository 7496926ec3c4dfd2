use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("dataset is empty after filtering (min_count={min_count})")]
    EmptyDataset { min_count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("item id {id} out of range (catalogue has {num_items} items)")]
    ItemOutOfRange { id: u32, num_items: usize },

    #[error("user {user}: only {eligible} eligible negatives, {requested} requested")]
    NotEnoughNegatives {
        user: u32,
        eligible: usize,
        requested: usize,
    },

    #[error("NaN score for candidate item {item}")]
    NanScore { item: u32 },

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("no evaluable users")]
    NoEvaluableUsers,

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. } => "malformed",
            Error::EmptyDataset { .. } => "empty_dataset",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ItemOutOfRange { .. } => "item_out_of_range",
            Error::NotEnoughNegatives { .. } => "not_enough_negatives",
            Error::NanScore { .. } => "nan_score",
            Error::NonFiniteLoss(_) => "non_finite_loss",
            Error::Format { .. } => "format",
            Error::NoEvaluableUsers => "no_evaluable_users",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

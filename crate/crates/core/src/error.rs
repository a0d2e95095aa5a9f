use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Bad cell or value in the input. `row` is the 0-based data row (header excluded).
    #[error("data error at row {row}: {msg}")]
    Data { row: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),

    #[error("tied scores at positions {0} and {1}")]
    ScoreTies(usize, usize),

    #[error("non-finite gradient statistics at round {round}, row {row}: g={g}, h={h}")]
    NonFiniteGradient { round: usize, row: usize, g: f64, h: f64 },

    #[error("feature count mismatch: model expects {expected}, data has {got}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("model parse error at byte {offset}: {msg}")]
    ModelParse { offset: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short stable category name, used for machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Data { .. } => "data",
            Error::Domain(_) => "domain",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFiniteScore(_) => "non_finite_score",
            Error::ScoreTies(..) => "score_ties",
            Error::NonFiniteGradient { .. } => "non_finite_gradient",
            Error::FeatureMismatch { .. } => "feature_mismatch",
            Error::Config(_) => "config",
            Error::ModelParse { .. } => "model_parse",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

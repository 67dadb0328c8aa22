use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset has no data rows")]
    EmptyDataset,

    #[error("label column holds more than two classes: {0:?}")]
    NonBinaryLabel(Vec<String>),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("z-score filter removed every row (threshold {threshold})")]
    EmptyResult { threshold: f64 },

    #[error("split ratio {0} must lie strictly between 0 and 1 and leave both parts non-empty")]
    InvalidRatio(f64),

    #[error("class {class} has too few rows ({rows}) for the requested partition")]
    InsufficientClassRows { class: u8, rows: usize },

    #[error("k = {k} is invalid for {features} features")]
    InvalidK { k: usize, features: usize },

    #[error("model family `{0}` exposes no per-feature importance")]
    EstimatorLacksImportance(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("non-finite loss while training {model} (epoch {epoch})")]
    NonFiniteLoss { model: String, epoch: usize },

    #[error("k = {k} exceeds the {rows} stored training rows")]
    KTooLarge { k: usize, rows: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("value {0} is not a binary label")]
    NonBinaryValue(u8),

    #[error("score at position {index} is not finite")]
    NonFiniteScore { index: usize },

    #[error("ROC/AUC undefined: only one class present")]
    SingleClass,

    #[error("{folds} folds requested but class {class} has only {rows} rows")]
    FoldTooSmall {
        folds: usize,
        class: u8,
        rows: usize,
    },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical procedures themselves.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFiniteLoss { .. }
                | Error::NonFiniteScore { .. }
                | Error::SingleClass
                | Error::EmptyResult { .. }
        )
    }

    /// Process exit code used by the CLI: 3 for numeric failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            3
        } else {
            2
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("requested {requested} neighbors but only {available} reference points exist")]
    InsufficientNeighbors { requested: usize, available: usize },

    #[error("region contains a single class")]
    SingleClassRegion,

    #[error("training set contains a single class")]
    SingleClassTrainingSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("operation requires a decision tree")]
    WrongModelKind,

    #[error("identical points carry different labels: {0}")]
    ContradictoryData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unknown attack label {0:?}")]
    UnknownLabel(String),
    #[error("invalid value at row {row}, column {column}: {message}")]
    InvalidValue {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("state error: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("balance plan error: {0}")]
    Plan(String),
    #[error("no training row satisfies condition on column {column}, category {category}")]
    ConditionUnsatisfiable { column: usize, category: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error(transparent)]
    Nd(#[from] ndiff::NdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

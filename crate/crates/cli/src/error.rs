use thiserror::Error;

/// Runner failures, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{failed} of {total} cells failed")]
    Partial { failed: usize, total: usize },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Data(_) => 2,
            RunError::Partial { .. } => 3,
        }
    }
}

impl From<tabsynth::Error> for RunError {
    fn from(e: tabsynth::Error) -> Self {
        use tabsynth::Error as E;
        match e {
            E::Config(_) | E::Plan(_) => RunError::Config(e.to_string()),
            _ => RunError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Data(e.to_string())
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

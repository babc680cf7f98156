use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{operand}`: expected {expected}, got {actual}")]
    Dimension {
        operand: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid dropout rate {0}: must lie in [0, 1)")]
    Rate(f64),

    #[error("token id {token} is outside the vocabulary of size {vocab}")]
    OutOfVocab { token: usize, vocab: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid tape: {0}")]
    Tape(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(operand: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            operand,
            expected,
            actual,
        }
    }
}

/// Fails with [`Error::Dimension`] unless `actual == expected`.
pub(crate) fn check_dim(operand: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dim(operand, expected, actual))
    }
}

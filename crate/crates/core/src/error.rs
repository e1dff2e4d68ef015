use alloc::string::String;

use crate::policy::NetVariant;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("terrain label {0} out of range 0..7")]
    LabelOutOfRange(usize),
    #[error("{0:?} net requires GVF predictions")]
    MissingPredictions(NetVariant),
    #[error("value {0} outside the valid state range [0, 1]")]
    StateOutOfRange(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

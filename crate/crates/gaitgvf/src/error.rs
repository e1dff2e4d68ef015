use std::io;
use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] gaitgvf_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Corrupt { path: PathBuf, line: u64, message: String },
    #[error("{}: byte {offset}: {message}", path.display())]
    BadCheckpoint { path: PathBuf, offset: u64, message: String },
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn corrupt(path: &Path, line: u64, message: impl Into<String>) -> Self {
        Error::Corrupt { path: path.to_path_buf(), line, message: message.into() }
    }

    /// Process exit code: 3 for unreadable session or checkpoint contents,
    /// 2 for everything else (bad input, bad config, IO failures).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Corrupt { .. } | Error::BadCheckpoint { .. } => 3,
            _ => 2,
        }
    }
}

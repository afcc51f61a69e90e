use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The TOML parser's message, which names the line, column and key.
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Solver(#[from] iamcf_core::Error),
}

impl Error {
    pub(crate) fn field(field: &str, err: iamcf_core::Error) -> Self {
        Error::Invalid { field: field.into(), message: err.to_string() }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Error::Io { path: path.to_path_buf(), message: err.to_string() }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed call token `{token}`: expected Class.method")]
    MalformedToken { token: String },

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate id {id} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: u64,
        first_line: usize,
        second_line: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}line {line}: {message}", file.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    RuleParse {
        file: Option<String>,
        line: usize,
        message: String,
    },

    #[error("class {class} is declared by both {first} and {second}")]
    DuplicateRule {
        class: String,
        first: String,
        second: String,
    },

    #[error("extraction failed at line {line}: {message}")]
    Extraction { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("ids without a counterpart: {ids:?}")]
    IdMismatch { ids: Vec<u64> },

    #[error("cannot split {n} entries into {k} folds")]
    FoldCount { k: usize, n: usize },

    #[error("repair did not converge; still violated: {remaining:?}")]
    Convergence { remaining: Vec<String> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

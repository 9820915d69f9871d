use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),
    #[error("{path}: malformed manifest: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("{path}: malformed matrix file: {msg}")]
    Matrix { path: PathBuf, msg: String },
    #[error("{path}: {role} is {found:?} but the manifest implies {expected:?}")]
    DimensionConflict {
        path: PathBuf,
        role: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{path}: invalid configuration: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl FileError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> FileError {
        let path = path.into();
        move |source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                FileError::MissingArtifact(path)
            } else {
                FileError::Io { path, source }
            }
        }
    }
}

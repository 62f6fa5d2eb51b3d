use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the benchmark library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("grid: {0}")]
    Grid(String),

    #[error("point ({x}, {y}) lies outside the domain [0, {width}] x [0, {height}]")]
    OutOfDomain {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },

    #[error("invalid parameter `{name}`: {message}")]
    Config { name: String, message: String },

    #[error("height {height} of optimum at index {index} is not covered by any band")]
    Coverage { index: usize, height: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("optimizer `{0}` returned without evaluating the objective")]
    StalledOptimizer(String),

    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            name: name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Grid(_)
                | Error::Coverage { .. }
                | Error::Checksum { .. }
                | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage tags attached to errors raised inside `run_pipeline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Graph,
    Classical,
    Encoding,
    Multiply,
    Inversion,
    Classification,
    Channels,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Graph => "graph",
            Stage::Classical => "classical",
            Stage::Encoding => "encoding",
            Stage::Multiply => "multiply",
            Stage::Inversion => "inversion",
            Stage::Classification => "classification",
            Stage::Channels => "channels",
        };
        f.write_str(name)
    }
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    Size { dim: usize, cap: usize },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    Symmetry { deviation: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degree error: vertex {vertex} is isolated")]
    Degree { vertex: usize },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("amplitude overflow: {0}")]
    AmplitudeOverflow(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Layout(_) | Error::Parameter(_) | Error::Parse { .. } | Error::Degree { .. } => {
                ErrorClass::Input
            }
            Error::Configuration(_) => ErrorClass::Input,
            Error::Io { .. } => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
            Error::Size { .. }
            | Error::Symmetry { .. }
            | Error::Encoding(_)
            | Error::Degenerate(_)
            | Error::AmplitudeOverflow(_)
            | Error::InvalidState(_) => ErrorClass::Numerical,
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

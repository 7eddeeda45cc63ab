use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("invalid hyperparameter spec: {0}")]
    InvalidSpec(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no datasets left: {0}")]
    EmptyCollection(String),

    #[error("all targets are constant")]
    ConstantTarget,

    #[error("need at least 2 samples to fit, got {0}")]
    TooFewSamples(usize),

    #[error("tree has zero variance")]
    DegenerateTree,

    #[error("every tree in the forest has zero variance")]
    ConstantModel,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the environment rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Dataset, UncertaintySource};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("unscripted request to {model} (fingerprint {fingerprint}): {preview:?}")]
    Unscripted {
        fingerprint: String,
        model: String,
        /// Start of the final user message.
        preview: String,
    },

    #[error("structured output could not be parsed; first response {first:?}, retry response {second:?}")]
    StructuredOutput { first: String, second: String },

    #[error("structured output is missing key `{key}`")]
    MissingKey { key: String },

    #[error("invalid judgment: {0}")]
    InvalidJudgment(String),

    #[error("degenerate ambiguation: obscured query equals `{0}`")]
    DegenerateAmbiguation(String),

    #[error("malformed AMR: {0}")]
    Amr(String),

    #[error("pool for {dataset} / {label} holds {available} cases, quota asks for {required}")]
    Shortfall {
        dataset: Dataset,
        label: UncertaintySource,
        available: usize,
        required: usize,
    },

    #[error("case `{0}` is labeled capability and cannot be resolved through an interaction channel")]
    UnsupportedCase(String),

    #[error("no gold label for case `{0}`")]
    MissingGold(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
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

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

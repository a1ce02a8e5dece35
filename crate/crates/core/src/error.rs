use std::path::PathBuf;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: u64, loss: f64 },

    #[error("missing corpus file for language `{lang}`: {path}")]
    MissingCorpus { lang: String, path: PathBuf },

    #[error("corpus file for language `{0}` contains no usable sentences")]
    EmptyCorpus(String),

    #[error("zero-norm vector for word `{0}`")]
    ZeroVector(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("inconsistent data: {0}")]
    Data(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category, used by the CLI for its exit line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::NotSymmetric(_) => "numeric",
            Error::InvalidArgument(_) => "argument",
            Error::NonFiniteGradient(_) | Error::Diverged { .. } => "training",
            Error::MissingCorpus { .. } | Error::EmptyCorpus(_) => "corpus",
            Error::ZeroVector(_) | Error::Data(_) => "data",
            Error::Parse { .. } | Error::Json(_) => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

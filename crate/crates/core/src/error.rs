use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value lies outside its mathematical domain (e.g. `rho > 1`).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("input sequence is empty")]
    EmptyInput,

    /// Input is well-formed but carries no usable information (e.g. all zeros).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("length mismatch: {left} observations vs {right} labels")]
    ShapeMismatch { left: usize, right: usize },

    #[error("input too large: {len} samples exceeds the limit of {max}")]
    Capacity { len: usize, max: usize },

    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

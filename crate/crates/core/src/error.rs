use thiserror::Error;

/// Errors raised across the solver, bound and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition (quadrature exactness, interval start, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Data cannot be represented on the requested grid or degree.
    #[error("unresolved data for (r,s)=({r},{s}): {msg}")]
    Resolution { r: u32, s: u32, msg: String },

    /// A bound evaluation needs a data norm that was not supplied.
    #[error("missing data norm for (r,s)=({r},{s})")]
    MissingNorm { r: u32, s: u32 },

    /// Invalid run configuration.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    /// Malformed CSV or plot input.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(line: impl Into<Option<usize>>, msg: impl Into<String>) -> Self {
        Error::Config {
            line: line.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Every failure the benchmark can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("ingestion error at line {line}: {message}")]
    Ingestion { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("degenerate range: min == max == {0}")]
    DegenerateRange(f64),

    #[error("insufficient data: need at least {required} {what}, got {available}")]
    InsufficientData { what: &'static str, required: usize, available: usize },

    #[error("fit failure: {message}")]
    FitFailure {
        message: String,
        /// Best objective value reached before giving up, when one exists.
        best_objective: Option<f64>,
    },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("division domain error: {0}")]
    DivisionDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("history is empty")]
    EmptyHistory,

    #[error("empty mini-batch")]
    EmptyBatch,

    #[error("sample index {index} out of range (T = {samples})")]
    SampleIndex { index: usize, samples: usize },

    #[error("this step needs a fallback optimizer but none was supplied")]
    MissingFallback,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    /// Mixer produced a non-finite update.
    #[error("non-finite update at step {step} (delta_k = {delta}, lambda_k = {lambda:?}, |gamma| = {gamma_norm})")]
    NonFiniteStep {
        step: usize,
        delta: f64,
        lambda: Option<f64>,
        gamma_norm: f64,
    },

    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{path}: row {row}: {msg}")]
    Data {
        path: String,
        row: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::NonFiniteStep { .. } | Error::Singular(_)
        )
    }
}

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A functional returned NaN or ±inf while probing or integrating.
    #[error("non-finite {what} at knot {knot}: {detail}")]
    Evaluation {
        what: &'static str,
        knot: usize,
        detail: String,
    },

    /// The Picard recursion or an Euler solve produced a non-finite state.
    #[error("iteration diverged at knot {knot} (value {value})")]
    Divergence { knot: usize, value: f64 },

    #[error("diffusion has no declared regularity bound on 1/g")]
    MissingRegularityBound,

    #[error("regularity violated at knot {knot}: |g| = {value} < {floor}")]
    Regularity { knot: usize, value: f64, floor: f64 },

    #[error("non-finite log density{}: {detail}", path_suffix(*.path))]
    Density { path: Option<usize>, detail: String },

    #[error("degenerate mixture{}: every inner exponent is -inf", path_suffix(*.path))]
    DegenerateMixture { path: Option<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

fn path_suffix(path: Option<usize>) -> String {
    path.map(|p| format!(" at path {p}")).unwrap_or_default()
}

impl Error {
    /// Tags density errors with the outer path they occurred on.
    pub fn at_path(self, id: usize) -> Self {
        match self {
            Error::Density { detail, .. } => Error::Density { path: Some(id), detail },
            Error::DegenerateMixture { .. } => Error::DegenerateMixture { path: Some(id) },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

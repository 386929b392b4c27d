use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("parameter vector outside the simplex: {0}")]
    OutsideSimplex(String),
    #[error("empty conditional interval for coordinate {coord}: [{lo}, {hi}]")]
    EmptyInterval { coord: usize, lo: f64, hi: f64 },
    #[error("point is outside the convex hull")]
    OutsideHull,
    #[error("constraint set is infeasible")]
    Infeasible,
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("chain {index} failed: {source}")]
    Chain {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Numeric(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            got,
        }
    }

    /// True for errors that indicate an empty or infeasible constraint region.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::Infeasible | Error::OutsideHull => true,
            Error::Chain { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}

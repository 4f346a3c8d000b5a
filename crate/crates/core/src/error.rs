use thiserror::Error;

/// Errors raised while constructing spaces or measuring inside them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("coordinate shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("{0} has no closed-form metric; use the geodesic solver")]
    NotPrimitive(String),

    #[error("{0} is not a single-chart space")]
    NotChart(String),

    #[error("path length did not converge: last estimate {last}, previous {previous}")]
    Convergence { last: f64, previous: f64 },

    #[error("unknown edge `{0}`")]
    UnknownEdge(String),

    #[error("points lie in different components")]
    Disconnected,

    #[error("geodesic result did not converge")]
    NotConverged,

    #[error("empty sampling window: {0}")]
    EmptyWindow(String),

    #[error("identification `{0}` has no chart samples inside the sampling window")]
    ChartOutsideWindow(String),

    #[error("net would have {0} nodes; increase epsilon or shrink the window")]
    NetTooLarge(usize),

    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("scale mismatch: {0}")]
    LambdaMismatch(String),

    #[error("invalid spec field `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("degenerate triangle: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }
}

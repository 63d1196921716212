use thiserror::Error;

/// Errors raised by the percolab library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window of dimension {d} and side {side} is too large to index")]
    WindowOverflow { d: usize, side: usize },

    #[error("point {point:?} lies outside the window")]
    OutsideWindow { point: Vec<i64> },

    #[error("point {point:?} is closer than {margin} to the window boundary")]
    TooCloseToBoundary { point: Vec<i64>, margin: usize },

    #[error("region does not fit inside the window: {0}")]
    Clipped(String),

    #[error("requested window needs {required} vertices, budget is {budget}")]
    ResourceExhausted { required: usize, budget: usize },

    #[error("polytope is not full-dimensional")]
    DegeneratePolytope,

    #[error("distance field was computed with cutoff {cutoff} < {requested}")]
    CutoffTooSmall { cutoff: u32, requested: f64 },

    #[error("source already lies in the open side of the half-space")]
    SourceBeyondHyperplane,

    #[error("only {usable} points with nonzero counts, need at least 3")]
    InsufficientEvents {
        usable: usize,
        /// `(x, -ln(3/total))` for every zero-count point.
        rule_of_three: Vec<(f64, f64)>,
    },

    #[error("no replica satisfied the conditioning event")]
    NoAcceptedReplicas,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

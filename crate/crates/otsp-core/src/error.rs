use thiserror::Error;

/// Errors produced by the solver library.
///
/// The CLI maps these onto exit codes: parameter, parse and infeasibility
/// errors exit with 1, resource errors with 2.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally malformed input (non-square matrix, asymmetric costs, ...).
    #[error("structural error: {0}")]
    Structural(String),

    /// The cost matrix violates the triangle inequality.
    #[error("costs are not metric: {count} violating triples, first {first:?}")]
    NotMetric { count: usize, first: (usize, usize, usize) },

    /// Invalid parameter combination (k > n, odd join set, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A document could not be parsed; `location` names the offending field or line.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A configured cap was exceeded (scale factor, oracle size, iteration cap).
    #[error("resource limit exceeded ({what}, cap {cap}): {detail}")]
    Resource { what: &'static str, cap: String, detail: String },

    /// Internal consistency failure; indicates a solver bug, not bad input.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}

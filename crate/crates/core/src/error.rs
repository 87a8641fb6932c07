use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {site} outside range [{lo}, {hi}]")]
    OutOfRange { site: i64, lo: i64, hi: i64 },

    #[error("invalid site range: {0}")]
    InvalidRange(String),

    #[error("incompatible ranges: {0}")]
    IncompatibleRanges(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series did not converge within {cap} terms")]
    NonConvergence { cap: usize },

    #[error("particle reached the window edge at site {site} (t = {time})")]
    WindowEdge { site: i64, time: f64 },

    #[error("event cap of {cap} reached before absorption")]
    EventCap { cap: u64 },

    #[error("state space too large: {states} states (limit {limit})")]
    StateSpaceOverflow { states: usize, limit: usize },

    #[error("generator is reducible")]
    Reducible,

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("mismatched observables: {0} vs {1}")]
    MismatchedObservables(String, String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("inconsistent trajectory at event {index}: {reason}")]
    InconsistentTrajectory { index: usize, reason: String },
}

impl Error {
    /// Runtime aborts (as opposed to bad input).
    pub fn is_runtime_abort(&self) -> bool {
        matches!(
            self,
            Error::WindowEdge { .. }
                | Error::EventCap { .. }
                | Error::NonConvergence { .. }
                | Error::Solver(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by `pslab_core`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("representation mismatch: expected {expected}, found {found}")]
    Representation {
        expected: &'static str,
        found: &'static str,
    },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("empty trace")]
    EmptyTrace,
    #[error("invalid exponent {0}")]
    Exponent(f64),
    #[error("invalid potential: {0}")]
    Potential(String),
    #[error("flow hypothesis violated: {0}")]
    FlowHypothesis(String),
    #[error("invalid step: {0}")]
    Step(String),
    #[error("unsupported propagation: {0}")]
    Unsupported(String),
    #[error("unresolvable on this grid: {0}")]
    Resolution(String),
    #[error("time {0} lies outside (-pi/2, pi/2)")]
    LensDomain(f64),
    #[error("degenerate samples: {0}")]
    Degenerate(String),
    #[error("input has no mass")]
    ZeroMass,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

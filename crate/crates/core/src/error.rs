use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("simulation infeasible: circulant embedding failed and {points} points exceed the dense fallback limit")]
    SimulationInfeasible { points: usize },
    #[error("non-positive quantity under a logarithm at position {0}")]
    NonPositiveLog(usize),
    #[error("odd dimension {0} in a Gaussian product moment")]
    OddDimension(usize),
    #[error("kappa table does not cover {0}")]
    TableCoverage(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("missing energy level (j={j}, p={p})")]
    MissingLevel { j: u32, p: u32 },
    #[error("empty energy ladder")]
    EmptyLadder,
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

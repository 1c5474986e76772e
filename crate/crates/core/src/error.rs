use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability outside [0,1]: {0}")]
    ProbabilityRange(f64),

    #[error("time outside [0,1]: {0}")]
    TimeRange(f64),

    #[error("factor index {index} out of range for {len} factors")]
    IndexRange { index: usize, len: usize },

    #[error("excluded indices must be distinct")]
    DuplicateIndex,

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("support sizes differ: {0} vs {1}")]
    SupportMismatch(usize, usize),

    #[error("support of length {len} exceeds declared order {order}")]
    SupportExceedsOrder { order: usize, len: usize },

    #[error("degenerate speed: endpoint means coincide")]
    DegenerateSpeed,

    #[error("not a monotone transport path: g[{k}] = {value:e} at t = {t}")]
    NegativeTransport { t: f64, k: usize, value: f64 },

    #[error("boundary degeneracy: mass {k} vanishes with nonzero flux at t = {t}")]
    BoundaryDegeneracy { t: f64, k: usize },

    #[error("stochastic domination violated at k = {0}")]
    DominationViolated(usize),

    #[error("path endpoints do not match at k = {0}")]
    EndpointMismatch(usize),

    #[error("conditions not verified: {0}")]
    ConditionsNotVerified(String),

    #[error("zero variance: every factor is deterministic")]
    ZeroVariance,

    #[error("non-monotone system: parameter {0} decreases")]
    NonMonotone(usize),

    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

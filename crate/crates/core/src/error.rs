use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("eigen-solver did not converge")]
    NoConvergence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("unknown builtin channel `{0}`")]
    UnknownName(String),
    #[error("parameter `{name}` = {value} out of range")]
    ParamOutOfRange { name: String, value: f64 },
    #[error("error parameter eps = {0} must lie in (0, 1)")]
    EpsOutOfRange(f64),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("feasibility failure: {0}")]
    FeasibilityFailure(String),
    #[error("all outcomes inconclusive for input {0}")]
    AllInconclusive(usize),
    #[error("supermap is signalling from Alice to Bob (violation {0:e})")]
    NotNonsignalling(f64),
    #[error("complementary supermap is not admissible: {0}")]
    AdmissibilityFailure(String),
    #[error("rate infeasible: d_M^2 = {dm_sq} is not below {threshold}")]
    InfeasibleRate { dm_sq: f64, threshold: f64 },
    #[error("empty scaling interval [{lo}, {hi}]")]
    EmptyScalingInterval { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

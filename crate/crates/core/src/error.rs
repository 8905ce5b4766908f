use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("function evaluation failed: {0}")]
    FunctionDomain(String),
    #[error("second derivative is singular at x = 0")]
    SecondDerivativeSingular,
    #[error("point is not on the unit circle (|z| = {modulus})")]
    NotOnCircle { modulus: f64 },
    #[error("function is not declared C2")]
    NotC2,
    #[error("feasibility solver stalled: {0}")]
    SolverStall(String),
    #[error("witness search failed: {0}")]
    WitnessSearchFailed(String),
    #[error("no admissible t on the dyadic grid")]
    NoAdmissibleT,
    #[error("degenerate case: {0}")]
    DegenerateCase(String),
    #[error("m-ladder exhausted without stabilization")]
    NoStabilization,
    #[error("need at least 3 records, got {0}")]
    InsufficientLadder(usize),
    #[error("non-finite entry")]
    NonFinite,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

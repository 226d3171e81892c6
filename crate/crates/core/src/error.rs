use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("SRV representation is not unit-norm (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("evaluation point {0} outside [0, 1]")]
    OutOfDomain(f64),

    #[error("invalid difference order {order} for basis dimension {dim}")]
    InvalidOrder { order: usize, dim: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("penalized normal equations are singular (condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("coefficient matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("Gram matrix is not positive definite")]
    NotSpd,

    #[error("rank-deficient zero-noise system in conditioning")]
    RankDeficiency,

    #[error("invalid conditioning problem: {0}")]
    InvalidProblem(String),

    #[error("posterior score vector is zero; smooth reconstruction undefined")]
    ZeroPosterior,

    #[error("group `{0}` has fewer than two curves")]
    EmptyGroup(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Numerical failures, as opposed to bad input data or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign { .. }
                | Error::NotHermitian { .. }
                | Error::NotSpd
                | Error::RankDeficiency
                | Error::ZeroPosterior
        )
    }
}

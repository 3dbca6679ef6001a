use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point {0} lies outside the domain")]
    OutsideDomain(String),
    #[error("coincident points at {0}")]
    CoincidentPoints(String),
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eig:e}, tolerance {tol:e})")]
    NotPsd { min_eig: f64, tol: f64 },
    #[error("Cholesky factorisation failed after jitter {0:e}")]
    Factorization(f64),
    #[error("quadrature did not converge: last two estimates differ by {diff:e} (tolerance {tol:e})")]
    QuadratureNonConvergence { diff: f64, tol: f64 },
    #[error("tail bound {bound:e} exceeds tolerance {tol:e} at truncation order {order}; raise the truncation")]
    TailBound { bound: f64, tol: f64, order: usize },
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
}

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Precondition,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::OutsideDomain(_) | Error::CoincidentPoints(_) => {
                ErrorKind::Precondition
            }
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

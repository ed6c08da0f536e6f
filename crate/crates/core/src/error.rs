use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("parameter {t} outside interval [{min}, {max}]")]
    OutOfInterval { t: f64, min: f64, max: f64 },
    #[error("invalid interval [{min}, {max}]: need finite min < max")]
    InvalidInterval { min: f64, max: f64 },
    #[error("covariance matrix is not symmetric")]
    AsymmetricCovariance,
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("condition gradient vanishes at t = {t}")]
    SingularCondition { t: f64 },
    #[error(
        "normalizing constant underflows (observation too far from the string for the float \
         range); rescale the problem"
    )]
    Underflow,
    #[error("quadrature node budget exceeded ({evaluations} > {limit})")]
    NodeBudget { evaluations: usize, limit: usize },
    #[error("map is not strictly monotone on the interval (near {at})")]
    NonMonotone { at: f64 },
    #[error("map endpoints do not match: {0}")]
    EndpointMismatch(String),
    #[error("slab inversion failed for {failures} of {proposals} proposals")]
    InversionFailure { failures: u64, proposals: u64 },
    #[error("no proposals were accepted")]
    NoAcceptance,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

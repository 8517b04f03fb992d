use alloc::boxed::Box;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, allowed {allowed:e})")]
    NotSymmetric { asymmetry: f64, allowed: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue {eigenvalue:e} is negative beyond tolerance (largest magnitude {scale:e})")]
    NegativeEigenvalueBeyondTolerance { eigenvalue: f64, scale: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),

    #[error("{name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("row {row} of the views matrix is all zeros")]
    EmptyViewRow { row: usize },

    #[error("view covariance is not positive semi-definite")]
    NonPsdViewCovariance,

    #[error("view covariance is singular; Black-Litterman updates need an invertible view covariance")]
    SingularViewCovariance,

    #[error("prior covariance is not positive semi-definite")]
    NonPsdPrior,

    #[error("views are expressed in the wrong space for this update")]
    TargetMismatch,

    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Wishart sampling needs df >= dimension (df = {df}, dim = {dim})")]
    InsufficientDegreesOfFreedom { df: usize, dim: usize },

    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("iteration budget exhausted (best objective {best_value:e}, gradient norm {gradient_norm:e})")]
    BudgetExhausted {
        best_value: f64,
        gradient_norm: f64,
        best: Box<crate::oracle::OracleSolution>,
    },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("series too short ({0} observations)")]
    TooShort(usize),

    #[error("length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("at rebalance row {row}: {source}")]
    AtRebalance { row: usize, source: Box<Error> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

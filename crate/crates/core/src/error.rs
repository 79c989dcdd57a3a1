use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rank decision fell inside the ambiguity window around the threshold.
    #[error("rank decision unstable: singular value ratio {ratio:e} is within the ambiguity window of tolerance {tol:e}")]
    RankAmbiguous { ratio: f64, tol: f64 },

    /// No eigenvalue clustering produced a well-conditioned spectral splitting.
    #[error("ill-conditioned Jordan-Chevalley decomposition: {0}")]
    IllConditioned(String),

    /// The sum im ad+(Omega0) + complement is not direct to working precision.
    #[error("splitting is not direct: combined rank {rank} < {expected}")]
    SplittingFailed { rank: usize, expected: usize },

    /// A small divisor fell below the safety bound `0.5 * gamma * |k|^-tau`.
    #[error("small divisor {divisor:e} at k = {k:?} is below the bound {bound:e}")]
    SmallDivisor { k: Vec<i64>, divisor: f64, bound: f64 },

    /// A k = 0 component of the homological equation has no solution.
    #[error("component {component} of the zero mode is unsolvable (defect {defect:e})")]
    Unsolvable {
        component: &'static str,
        defect: f64,
        witness: Vec<f64>,
    },

    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("integer overflow in unimodular reduction")]
    Overflow,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

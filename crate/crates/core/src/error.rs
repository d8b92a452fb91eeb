use thiserror::Error;

use crate::numerics::QuadratureResult;

/// Failure causes, partitioned so the command line can map each one to a
/// distinct exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or spec file violates a structural invariant.
    #[error("invalid model: {0}")]
    Model(String),

    /// A call argument is malformed (dimension mismatch, NaN, negative time, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Evaluation outside the domain of a deterministic function (no extrapolation).
    #[error("domain error: {0}")]
    Domain(String),

    /// Subset tables beyond the supported component count.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Adaptive quadrature hit its depth cap before meeting the tolerance.
    #[error("quadrature did not converge: {message} (partial value {}, est. error {:e}, {} panels)", .partial.value, .partial.est_error, .partial.panels)]
    Quadrature {
        message: String,
        partial: QuadratureResult,
    },

    /// Other numerical failures, e.g. a Monte Carlo tail bound that cannot be met.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The operation is not defined for this model family.
    #[error("unsupported model: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the `corrcox` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_) | Error::Argument(_) | Error::Domain(_) => 2,
            Error::Capacity(_) => 3,
            Error::Quadrature { .. } | Error::Numerical(_) => 4,
            Error::Unsupported(_) => 5,
        }
    }
}

//! Error type shared by the discretization, solver, and verification layers.

use thiserror::Error;

/// Errors produced by grid construction, spectral operations, solvers, and
/// file IO.
#[derive(Debug, Error)]
pub enum TorusError {
    /// Grid resolution must be a power of two and at least 8.
    #[error("grid resolution {0} is not a power of two >= 8")]
    GridSize(usize),
    /// Two fields (or a field and an operator) live on different grids.
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch {
        /// Resolution of the left operand.
        left: usize,
        /// Resolution of the right operand.
        right: usize,
    },
    /// A Poisson right-hand side must have zero mean.
    #[error("Poisson right-hand side has mean {mean:e}, exceeding 1e-10")]
    NotMeanZero {
        /// Measured mean of the offending field.
        mean: f64,
    },
    /// Invalid scalar parameter (coupling constants, weights, radii, ...).
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// Offending value.
        value: f64,
    },
    /// A weight field must be strictly positive.
    #[error("weight field {name} has non-positive minimum {min:e}")]
    NonPositiveWeight {
        /// Name of the offending field.
        name: &'static str,
        /// Minimum value found.
        min: f64,
    },
    /// The iterate left the region where the exponential nonlinearity is
    /// finite; the solve is diverging.
    #[error("iterate blew up: max |u| = {max_abs:e}")]
    BlowUp {
        /// Largest magnitude reached by the iterate.
        max_abs: f64,
    },
    /// An iterative solve stopped making progress before the tolerance.
    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NonConvergence {
        /// Iterations performed.
        iters: usize,
        /// Final residual norm.
        residual: f64,
    },
    /// The requested concentration scale cannot be resolved by the grid.
    #[error("resolution limit: core scale {scale:e} below 4x grid spacing {spacing:e}")]
    ResolutionLimit {
        /// Core length scale that must be resolved.
        scale: f64,
        /// Grid spacing of the requested grid.
        spacing: f64,
    },
    /// The scale equation lambda e^{-lambda} = c has no solution of the
    /// requested sign: c and the local coefficient disagree in sign.
    #[error("sign mismatch in scale equation: c = {c:e}")]
    SignMismatch {
        /// Right-hand side of the scale equation.
        c: f64,
    },
    /// The scale equation only has the large branch for c < 1/e.
    #[error("scale equation has no large-lambda branch: c = {c:e} >= 1/e")]
    NoLargeBranch {
        /// Right-hand side of the scale equation.
        c: f64,
    },
    /// A linearization is numerically singular, so index data (Morse signs)
    /// is unavailable.
    #[error("degenerate linearization: smallest singular value {sigma:e} below {threshold:e}")]
    Degenerate {
        /// Smallest singular value found.
        sigma: f64,
        /// Certification threshold.
        threshold: f64,
    },
    /// Dense linear algebra is restricted to small grids.
    #[error("dense operation requested at n = {n}, limit is {limit}")]
    DenseSizeLimit {
        /// Requested resolution.
        n: usize,
        /// Largest allowed resolution.
        limit: usize,
    },
    /// File IO failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A field file had the wrong shape or unparseable contents.
    #[error("malformed field file: {0}")]
    Format(String),
}

/// Convenience alias for results in this crate.
pub type Result<T> = core::result::Result<T, TorusError>;

//! Spectral discretization, solvers, and verification instruments for the
//! two-parameter mean field equation
//! \[
//!   \Delta u + \rho_1\Big(\frac{h_1 e^u}{\int h_1 e^u} - 1\Big)
//!            - \rho_2\Big(\frac{h_2 e^{-u}}{\int h_2 e^{-u}} - 1\Big) = 0
//! \]
//! on the flat unit torus.
//!
//! The crate provides, in layers:
//!
//! * [`grid`] / [`fft`]: uniform grids, sampled fields with file IO, and
//!   Fourier-spectral calculus (Laplacian, Poisson solves, derivatives,
//!   trigonometric interpolation);
//! * [`green`]: the torus Green function, both as exact point evaluators
//!   (heat-kernel split lattice sums) and as band-limited grid fields;
//! * [`solver`]: residuals, damped Newton solvers, and Morse index counts
//!   for the scalar equation and its equivalent 2x2 Liouville-type system;
//! * [`bubble`]: the concentration ansatz (single bubble glued to the Green
//!   function), its scale equation, expansion checks, and the projections
//!   that drive the degree-counting machinery;
//! * [`shadow`]: the reduced (shadow) system coupling a point with a single
//!   mean field equation carrying a weight-two singular source, with
//!   topological-degree bookkeeping via linearization determinant signs.

#![deny(missing_docs)]

pub mod bubble;
pub mod error;
pub mod fft;
pub mod green;
pub mod grid;
pub mod linalg;
pub mod shadow;
pub mod solver;

pub use error::{Result, TorusError};
pub use fft::{Spectral, SpectralField};
pub use grid::{min_image, torus_distance, wrap_offset, TorusField, TorusGrid};

//! Exact combinatorial machinery for Leray–Schauder degree counting of
//! Liouville-type mean field equations.
//!
//! The crate has two layers:
//!
//! * [`series`] — truncated formal power series with exact rational exponents
//!   and coefficients, together with the two generating-function builders
//!   (geometric powers and singular-source factors) the degree formulas need.
//! * [`degree`] — the degree tables themselves: critical parameter sets,
//!   the `b_k` binomial coefficients of the regular problem, and the
//!   single-parameter, shadow-system and two-parameter degree maps.
//!
//! Everything here is exact integer/rational arithmetic; no floating point
//! is involved. The crate is `no_std` (it only needs `alloc`), so the tables
//! can be embedded anywhere.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;

pub mod degree;
pub mod series;

pub use degree::{
    b_coeff, critical_set, degree_shadow, degree_singular, degree_two_param, DegreeError,
    DegreeResult, SingularSet, SurfaceTopology,
};
pub use series::{geometric_power, singular_factor, FormalSeries, Rational, SeriesError};

//! One module per subcommand.

pub mod bubble;
pub mod degree;
pub mod shadow;
pub mod solve;

/// Couplings on the command line are in units of `8π`; the PDE layers use
/// absolute values.
pub const EIGHT_PI: f64 = 8.0 * std::f64::consts::PI;

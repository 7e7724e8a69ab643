//! Degree tables for Liouville-type mean field equations.
//!
//! All parameter inputs are exact rationals measured in units of `8π`, so
//! the critical thresholds sit at integers and integer combinations of the
//! singular weights and every interval test is exact.
//!
//! The central objects are:
//!
//! * the critical set `Σ/8π = { N + Σ_{q∈A} (1+α_q) : N ≥ 0, A ⊆ S } \ {0}`
//!   outside of which solution sets stay compact,
//! * the generating function
//!   `Ξ₁ = (1 + x + x² + ⋯)^{−χ+1+|S|} · Π_q (1 − x^{1+α_q})`
//!   whose coefficients are the degrees between consecutive critical values,
//! * the binomial coefficients `b_k = C(k−χ, k)` of the regular problem,
//! * the shadow-system and two-parameter tables assembled from those pieces.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::series::{geometric_power, singular_factor, FormalSeries, Rational};

/// Largest number of singular points accepted before subset enumeration of
/// the critical set becomes unreasonable.
const MAX_SINGULAR_POINTS: usize = 20;

/// Errors from degree-table construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegreeError {
    /// Euler characteristic must be even (closed orientable surface) and at
    /// most 2.
    InvalidEulerChar(i64),
    /// Singular weights must be non-negative.
    NegativeWeight(Rational),
    /// A degree was requested at a non-positive parameter.
    NonPositiveRho(Rational),
    /// `degree_two_param` only covers `ρ₁/8π ∈ (0, 2)`.
    UnsupportedRhoRange(Rational),
    /// Too many singular points for exact subset enumeration.
    TooManySingularPoints(usize),
}

impl fmt::Display for DegreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeError::InvalidEulerChar(chi) => {
                write!(f, "Euler characteristic {chi} is not an even integer <= 2")
            }
            DegreeError::NegativeWeight(a) => write!(f, "negative singular weight {a}"),
            DegreeError::NonPositiveRho(r) => {
                write!(f, "parameter rho/8pi = {r} must be positive")
            }
            DegreeError::UnsupportedRhoRange(r) => {
                write!(f, "rho1/8pi = {r} outside the supported range (0, 2)")
            }
            DegreeError::TooManySingularPoints(n) => {
                write!(f, "{n} singular points exceed the enumeration limit")
            }
        }
    }
}

impl core::error::Error for DegreeError {}

/// Closed orientable surface described by its Euler characteristic
/// `χ ∈ {2, 0, −2, −4, …}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceTopology {
    euler_char: i64,
}

impl SurfaceTopology {
    /// Validates that `euler_char` is even and at most 2.
    pub fn new(euler_char: i64) -> Result<Self, DegreeError> {
        if euler_char > 2 || euler_char % 2 != 0 {
            return Err(DegreeError::InvalidEulerChar(euler_char));
        }
        Ok(SurfaceTopology { euler_char })
    }

    /// The sphere, `χ = 2`.
    pub fn sphere() -> Self {
        SurfaceTopology { euler_char: 2 }
    }

    /// The torus, `χ = 0`.
    pub fn torus() -> Self {
        SurfaceTopology { euler_char: 0 }
    }

    /// Euler characteristic of the surface.
    pub fn euler_char(&self) -> i64 {
        self.euler_char
    }
}

/// Finite set of singular points carrying weights `α_q ≥ 0`; a Dirac source
/// of strength `8π(1+α_q)` sits at each point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SingularSet {
    weights: Vec<Rational>,
}

impl SingularSet {
    /// Validates that every weight is non-negative.
    pub fn new(weights: Vec<Rational>) -> Result<Self, DegreeError> {
        if let Some(bad) = weights.iter().find(|a| a.is_negative()) {
            return Err(DegreeError::NegativeWeight(bad.clone()));
        }
        if weights.len() > MAX_SINGULAR_POINTS {
            return Err(DegreeError::TooManySingularPoints(weights.len()));
        }
        Ok(SingularSet { weights })
    }

    /// The empty (regular) set.
    pub fn empty() -> Self {
        SingularSet::default()
    }

    /// Weights of the singular points.
    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Number of singular points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Whether the set is empty (regular problem).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Outcome of a degree query at one parameter value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegreeResult {
    /// The parameter lies strictly between consecutive critical values;
    /// `interval_index = k` means the open interval just above the `k`-th
    /// critical value (`k = 0` is the interval below the first one).
    Regular {
        /// Leray–Schauder degree on that interval.
        value: BigInt,
        /// Index of the interval in the ordered critical set.
        interval_index: usize,
    },
    /// The parameter sits exactly on the critical set; no degree is defined.
    Critical,
}

impl DegreeResult {
    /// Degree value, when defined.
    pub fn value(&self) -> Option<&BigInt> {
        match self {
            DegreeResult::Regular { value, .. } => Some(value),
            DegreeResult::Critical => None,
        }
    }

    /// Interval index, when defined.
    pub fn interval_index(&self) -> Option<usize> {
        match self {
            DegreeResult::Regular { interval_index, .. } => Some(*interval_index),
            DegreeResult::Critical => None,
        }
    }

    /// Whether the query hit the critical set exactly.
    pub fn is_critical(&self) -> bool {
        matches!(self, DegreeResult::Critical)
    }
}

/// All critical values `N + Σ_{q∈A} (1+α_q) ≤ bound` (in units of `8π`),
/// excluding zero, sorted and deduplicated.
///
/// The set depends only on the weights; the surface enters the degree values
/// but not the critical thresholds.
///
/// # Examples
///
/// ```
/// use mfe_degree::{critical_set, SingularSet, SurfaceTopology};
/// use mfe_degree::series::{rational, Rational};
///
/// let torus = SurfaceTopology::torus();
/// let sing = SingularSet::new(vec![Rational::new(1.into(), 2.into())]).unwrap();
/// let set = critical_set(&torus, &sing, &rational(3));
/// let expect: Vec<Rational> = [(1, 1), (3, 2), (2, 1), (5, 2), (3, 1)]
///     .iter()
///     .map(|&(n, d)| Rational::new(n.into(), d.into()))
///     .collect();
/// assert_eq!(set, expect);
/// ```
pub fn critical_set(
    _topo: &SurfaceTopology,
    sing: &SingularSet,
    bound: &Rational,
) -> Vec<Rational> {
    let mut subset_sums: BTreeSet<Rational> = BTreeSet::new();
    subset_sums.insert(Rational::zero());
    for alpha in sing.weights() {
        let step = alpha + Rational::one();
        let previous: Vec<Rational> = subset_sums.iter().cloned().collect();
        for s in previous {
            let v = s + &step;
            if &v <= bound {
                subset_sums.insert(v);
            }
        }
    }
    let mut out: BTreeSet<Rational> = BTreeSet::new();
    for s in subset_sums {
        let mut v = s;
        while &v <= bound {
            if !v.is_zero() {
                out.insert(v.clone());
            }
            v += Rational::one();
        }
    }
    out.into_iter().collect()
}

/// The binomial coefficient `b_k = C(k − χ, k)` of the regular problem:
/// `b_0 = 1`, `b_k = (k−χ)(k−1−χ)⋯(1−χ)/k!` for `k ≥ 1`, and `b_k = 0`
/// for `k < 0`.
///
/// Equals the coefficient of `x^k` in `geometric_power(1 − χ)`.
///
/// # Examples
///
/// ```
/// use mfe_degree::{b_coeff, SurfaceTopology};
/// use num_bigint::BigInt;
///
/// let sphere = SurfaceTopology::sphere();
/// assert_eq!(b_coeff(&sphere, 1), BigInt::from(-1));
/// let torus = SurfaceTopology::torus();
/// assert_eq!(b_coeff(&torus, 3), BigInt::from(1));
/// ```
pub fn b_coeff(topo: &SurfaceTopology, k: i64) -> BigInt {
    if k < 0 {
        return BigInt::zero();
    }
    let chi = topo.euler_char();
    let mut numer = BigInt::one();
    let mut denom = BigInt::one();
    for j in 1..=k {
        numer *= BigInt::from(j - chi);
        denom *= BigInt::from(j);
    }
    // The product of k consecutive integers ending at k−χ is divisible by k!.
    numer / denom
}

fn xi_one(topo: &SurfaceTopology, sing: &SingularSet, order: &Rational) -> FormalSeries {
    let m = -topo.euler_char() + 1 + sing.len() as i64;
    let mut xi = geometric_power(m, order);
    for alpha in sing.weights() {
        let factor =
            singular_factor(alpha, order).expect("weights validated by SingularSet::new");
        xi = xi.mul(&factor).expect("factors share one truncation order");
    }
    xi
}

/// Degree of the single-parameter singular problem at `ρ/8π`.
///
/// With `a_k` the `k`-th element of [`critical_set`] (`a_0 = 0`), the degree
/// on the open interval `(a_k, a_{k+1})` is the coefficient of `x^{a_k}` in
/// `Ξ₁` (which is 1 for `k = 0`); parameters on the critical set report
/// [`DegreeResult::Critical`].
///
/// # Examples
///
/// ```
/// use mfe_degree::{degree_singular, DegreeResult, SingularSet, SurfaceTopology};
/// use mfe_degree::series::Rational;
/// use num_bigint::BigInt;
///
/// let sphere = SurfaceTopology::sphere();
/// let rho = Rational::new(3.into(), 2.into());
/// let result = degree_singular(&rho, &sphere, &SingularSet::empty()).unwrap();
/// assert_eq!(result.value(), Some(&BigInt::from(-1)));
/// ```
pub fn degree_singular(
    rho_over_8pi: &Rational,
    topo: &SurfaceTopology,
    sing: &SingularSet,
) -> Result<DegreeResult, DegreeError> {
    if !rho_over_8pi.is_positive() {
        return Err(DegreeError::NonPositiveRho(rho_over_8pi.clone()));
    }
    let order = rho_over_8pi + Rational::one();
    let critical = critical_set(topo, sing, &order);
    if critical.binary_search(rho_over_8pi).is_ok() {
        return Ok(DegreeResult::Critical);
    }
    let k = critical.iter().take_while(|a| *a < rho_over_8pi).count();
    if k == 0 {
        return Ok(DegreeResult::Regular {
            value: BigInt::one(),
            interval_index: 0,
        });
    }
    let a_k = &critical[k - 1];
    let xi = xi_one(topo, sing, &order);
    let coeff = xi.coefficient(a_k);
    debug_assert!(coeff.is_integer());
    Ok(DegreeResult::Regular {
        value: coeff.to_integer(),
        interval_index: k,
    })
}

/// Degree of the shadow system at `ρ₂/8π`: `χ(M) · (b_k + b_{k−1} + b_{k−2})`
/// for `ρ₂/8π ∈ (k, k+1)`, computed through the generating function with a
/// single weight-2 singular source so that the binomial form can be checked
/// against it independently.
///
/// # Examples
///
/// ```
/// use mfe_degree::{degree_shadow, SurfaceTopology};
/// use mfe_degree::series::Rational;
/// use num_bigint::BigInt;
///
/// let sphere = SurfaceTopology::sphere();
/// let rho2 = Rational::new(7.into(), 2.into()); // in (3, 4): k = 3
/// let result = degree_shadow(&rho2, &sphere).unwrap();
/// assert_eq!(result.value(), Some(&BigInt::from(-2)));
/// ```
pub fn degree_shadow(
    rho2_over_8pi: &Rational,
    topo: &SurfaceTopology,
) -> Result<DegreeResult, DegreeError> {
    if !rho2_over_8pi.is_positive() {
        return Err(DegreeError::NonPositiveRho(rho2_over_8pi.clone()));
    }
    if rho2_over_8pi.is_integer() {
        return Ok(DegreeResult::Critical);
    }
    let k = rho2_over_8pi
        .floor()
        .to_integer()
        .to_i64()
        .expect("interval index fits in i64");
    let order = Rational::from_integer((k + 1).into());
    let weight_two = SingularSet::new(alloc::vec![Rational::from_integer(2.into())])
        .expect("weight 2 is valid");
    let xi = xi_one(topo, &weight_two, &order);
    let coeff = xi.coefficient(&Rational::from_integer(k.into()));
    debug_assert!(coeff.is_integer());
    let value = BigInt::from(topo.euler_char()) * coeff.to_integer();
    Ok(DegreeResult::Regular {
        value,
        interval_index: k as usize,
    })
}

/// Degree of the two-parameter problem at `(ρ₁/8π, ρ₂/8π)` with
/// `ρ₁/8π ∈ (0, 2)` and any `ρ₂ > 0`:
///
/// * `ρ₁/8π ∈ (0, 1)`: `b_k`,
/// * `ρ₁/8π ∈ (1, 2)`: `b_k − χ(M)(b_k + b_{k−1} + b_{k−2})`,
///
/// where `ρ₂/8π ∈ (k, k+1)`. Parameters with `ρ₁/8π = 1` or integer
/// `ρ₂/8π` are critical; `ρ₁/8π ∉ (0, 2)` is rejected as unsupported.
///
/// # Examples
///
/// ```
/// use mfe_degree::{degree_two_param, SurfaceTopology};
/// use mfe_degree::series::Rational;
/// use num_bigint::BigInt;
///
/// let sphere = SurfaceTopology::sphere();
/// let r = |n: i64| Rational::new((2 * n + 1).into(), 2.into()); // n + 1/2
/// let d = degree_two_param(&r(1), &r(1), &sphere).unwrap();
/// assert_eq!(d.value(), Some(&BigInt::from(-1)));
/// let d = degree_two_param(&r(1), &r(3), &sphere).unwrap();
/// assert_eq!(d.value(), Some(&BigInt::from(2)));
/// ```
pub fn degree_two_param(
    rho1_over_8pi: &Rational,
    rho2_over_8pi: &Rational,
    topo: &SurfaceTopology,
) -> Result<DegreeResult, DegreeError> {
    if !rho1_over_8pi.is_positive() || rho1_over_8pi >= &Rational::from_integer(2.into()) {
        return Err(DegreeError::UnsupportedRhoRange(rho1_over_8pi.clone()));
    }
    if !rho2_over_8pi.is_positive() {
        return Err(DegreeError::NonPositiveRho(rho2_over_8pi.clone()));
    }
    if rho1_over_8pi.is_one() || rho2_over_8pi.is_integer() {
        return Ok(DegreeResult::Critical);
    }
    let k = rho2_over_8pi
        .floor()
        .to_integer()
        .to_i64()
        .expect("interval index fits in i64");
    let b_k = b_coeff(topo, k);
    let value = if rho1_over_8pi < &Rational::one() {
        b_k
    } else {
        let shadow_sum = &b_k + b_coeff(topo, k - 1) + b_coeff(topo, k - 2);
        b_k - BigInt::from(topo.euler_char()) * shadow_sum
    };
    Ok(DegreeResult::Regular {
        value,
        interval_index: k as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::rational;

    #[test]
    fn sphere_rejects_odd_chi() {
        assert_eq!(
            SurfaceTopology::new(1),
            Err(DegreeError::InvalidEulerChar(1))
        );
        assert_eq!(
            SurfaceTopology::new(4),
            Err(DegreeError::InvalidEulerChar(4))
        );
    }

    #[test]
    fn critical_set_regular_is_integers() {
        let set = critical_set(
            &SurfaceTopology::sphere(),
            &SingularSet::empty(),
            &rational(4),
        );
        assert_eq!(set, [rational(1), rational(2), rational(3), rational(4)]);
    }

    #[test]
    fn degree_at_critical_value_is_flagged() {
        let d = degree_singular(
            &rational(2),
            &SurfaceTopology::torus(),
            &SingularSet::empty(),
        )
        .unwrap();
        assert!(d.is_critical());
    }
}

//! Truncated formal power series with exact rational exponents.
//!
//! A [`FormalSeries`] is a finite ordered map from non-negative rational
//! exponents to nonzero rational coefficients, plus a truncation order: a
//! term `c·x^e` is stored only while `e < truncation_order`. All arithmetic
//! is exact. Exponents are genuinely rational because singular sources of
//! weight `α` contribute factors `1 − x^{1+α}` with `α` an arbitrary
//! non-negative rational.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational scalar used for exponents and coefficients alike.
pub type Rational = BigRational;

/// Errors from series construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesError {
    /// Binary operation on series with different truncation orders.
    TruncationMismatch {
        /// Truncation order of the left operand.
        left: Rational,
        /// Truncation order of the right operand.
        right: Rational,
    },
    /// A term exponent was negative.
    NegativeExponent(Rational),
    /// A singular weight `α` was negative.
    NegativeWeight(Rational),
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::TruncationMismatch { left, right } => {
                write!(f, "truncation orders differ: {left} vs {right}")
            }
            SeriesError::NegativeExponent(e) => write!(f, "negative exponent {e}"),
            SeriesError::NegativeWeight(a) => write!(f, "negative singular weight {a}"),
        }
    }
}

impl core::error::Error for SeriesError {}

/// Truncated formal power series `Σ c_e · x^e` with rational `e ≥ 0`.
///
/// Stored terms always satisfy `c_e ≠ 0` and `e < truncation_order`; both
/// invariants are restored by every operation.
///
/// # Examples
///
/// ```
/// use mfe_degree::series::{geometric_power, FormalSeries, Rational};
///
/// let order = Rational::from_integer(4.into());
/// // (1 + x + x^2 + x^3) * (1 - x) = 1 - x^4 = 1 after truncation at x^4.
/// let geo = geometric_power(1, &order);
/// let inv = geometric_power(-1, &order);
/// assert_eq!(geo.mul(&inv).unwrap(), FormalSeries::one(order));
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalSeries {
    terms: BTreeMap<Rational, Rational>,
    truncation_order: Rational,
}

/// Shorthand for an exact integer-valued [`Rational`].
pub fn rational(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl FormalSeries {
    /// The zero series with the given truncation order.
    pub fn zero(truncation_order: Rational) -> Self {
        FormalSeries {
            terms: BTreeMap::new(),
            truncation_order,
        }
    }

    /// The constant series `1` with the given truncation order.
    pub fn one(truncation_order: Rational) -> Self {
        Self::monomial(Rational::one(), Rational::zero(), truncation_order)
    }

    /// A single term `coeff · x^exponent`, dropped if it lies at or beyond
    /// the truncation order.
    pub fn monomial(coeff: Rational, exponent: Rational, truncation_order: Rational) -> Self {
        let mut s = Self::zero(truncation_order);
        s.insert_term(exponent, coeff);
        s
    }

    /// Builds a series from `(exponent, coefficient)` pairs; coefficients on
    /// equal exponents accumulate. Negative exponents are rejected.
    pub fn from_terms<I>(terms: I, truncation_order: Rational) -> Result<Self, SeriesError>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut s = Self::zero(truncation_order);
        for (e, c) in terms {
            if e.is_negative() {
                return Err(SeriesError::NegativeExponent(e));
            }
            s.insert_term(e, c);
        }
        Ok(s)
    }

    fn insert_term(&mut self, exponent: Rational, coeff: Rational) {
        use alloc::collections::btree_map::Entry;
        if coeff.is_zero() || exponent >= self.truncation_order {
            return;
        }
        match self.terms.entry(exponent) {
            Entry::Vacant(slot) => {
                slot.insert(coeff);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += coeff;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    /// Exponent bound below which terms are kept.
    pub fn truncation_order(&self) -> &Rational {
        &self.truncation_order
    }

    /// Coefficient of `x^exponent` (zero when no such term is stored).
    pub fn coefficient(&self, exponent: &Rational) -> Rational {
        self.terms.get(exponent).cloned().unwrap_or_else(Rational::zero)
    }

    /// Stored terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.terms.iter()
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Whether no nonzero term is stored.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_order(&self, other: &Self) -> Result<(), SeriesError> {
        if self.truncation_order != other.truncation_order {
            return Err(SeriesError::TruncationMismatch {
                left: self.truncation_order.clone(),
                right: other.truncation_order.clone(),
            });
        }
        Ok(())
    }

    /// Term-wise sum; the operands must share a truncation order.
    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scale(&self, factor: &Rational) -> Self {
        let mut out = Self::zero(self.truncation_order.clone());
        for (e, c) in &self.terms {
            out.insert_term(e.clone(), c * factor);
        }
        out
    }

    /// Cauchy product truncated at the shared order.
    ///
    /// Returns [`SeriesError::TruncationMismatch`] when the operands carry
    /// different truncation orders: silently reconciling them would hide
    /// dropped terms.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        let mut out = Self::zero(self.truncation_order.clone());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea + eb;
                if e >= out.truncation_order {
                    continue;
                }
                out.insert_term(e, ca * cb);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        } else {
            let mut first = true;
            for (e, c) in &self.terms {
                let mag = c.abs();
                let sign = if c.is_negative() { "-" } else { "+" };
                if first {
                    if c.is_negative() {
                        write!(f, "-")?;
                    }
                    first = false;
                } else {
                    write!(f, " {sign} ")?;
                }
                let coeff: String = if mag.is_one() && !e.is_zero() {
                    String::new()
                } else {
                    alloc::format!("{mag}")
                };
                if e.is_zero() {
                    write!(f, "{coeff}")?;
                } else if e.is_one() {
                    write!(f, "{coeff}{}x", if coeff.is_empty() { "" } else { "*" })?;
                } else {
                    write!(f, "{coeff}{}x^{e}", if coeff.is_empty() { "" } else { "*" })?;
                }
            }
        }
        write!(f, " + O(x^{})", self.truncation_order)
    }
}

/// The geometric-series power `(1 + x + x^2 + ⋯)^m = (1 − x)^{−m}`,
/// truncated at `order`.
///
/// For `m ≥ 0` the coefficient of `x^k` is `binomial(m + k − 1, k)`; for
/// `m < 0` the result is the finite polynomial `(1 − x)^{|m|}`. In both
/// cases all exponents are integers.
///
/// # Examples
///
/// ```
/// use mfe_degree::series::{geometric_power, rational};
///
/// let g = geometric_power(2, &rational(4));
/// let coeffs: Vec<i64> = (0..4)
///     .map(|k| {
///         let c = g.coefficient(&rational(k));
///         assert!(c.is_integer());
///         i64::try_from(c.to_integer()).unwrap()
///     })
///     .collect();
/// assert_eq!(coeffs, [1, 2, 3, 4]);
/// ```
pub fn geometric_power(m: i64, order: &Rational) -> FormalSeries {
    let mut out = FormalSeries::zero(order.clone());
    if m >= 0 {
        let mut coeff = BigInt::one();
        let mut k: i64 = 0;
        while &rational(k) < order {
            out.insert_term(rational(k), Rational::from_integer(coeff.clone()));
            k += 1;
            // binomial(m+k-1, k) = binomial(m+k-2, k-1) * (m+k-1) / k
            coeff = coeff * BigInt::from(m + k - 1) / BigInt::from(k);
            if coeff.is_zero() {
                break;
            }
        }
    } else {
        let n = -m;
        let mut coeff = BigInt::one();
        for k in 0..=n {
            if &rational(k) >= order {
                break;
            }
            let signed = if k % 2 == 0 { coeff.clone() } else { -coeff.clone() };
            out.insert_term(rational(k), Rational::from_integer(signed));
            if k < n {
                coeff = coeff * BigInt::from(n - k) / BigInt::from(k + 1);
            }
        }
    }
    out
}

/// The singular-source factor `1 − x^{1+α}` for a weight `α ≥ 0`,
/// truncated at `order`.
///
/// # Examples
///
/// ```
/// use mfe_degree::series::{rational, singular_factor, Rational};
///
/// let f = singular_factor(&rational(2), &rational(5)).unwrap();
/// assert_eq!(f.coefficient(&rational(3)), rational(-1));
///
/// // With order 3/2 the term x^{1+α} is already truncated away.
/// let half = Rational::new(3.into(), 2.into());
/// let f = singular_factor(&rational(2), &half).unwrap();
/// assert_eq!(f.len(), 1);
/// ```
pub fn singular_factor(alpha: &Rational, order: &Rational) -> Result<FormalSeries, SeriesError> {
    if alpha.is_negative() {
        return Err(SeriesError::NegativeWeight(alpha.clone()));
    }
    let mut out = FormalSeries::one(order.clone());
    out.insert_term(alpha + Rational::one(), -Rational::one());
    Ok(out)
}

/// Product of a sequence of series sharing one truncation order.
pub fn product<'a, I>(factors: I, order: &Rational) -> Result<FormalSeries, SeriesError>
where
    I: IntoIterator<Item = &'a FormalSeries>,
{
    let mut acc = FormalSeries::one(order.clone());
    for f in factors {
        acc = acc.mul(f)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn insert_cancels_to_zero() {
        let order = rational(10);
        let s = FormalSeries::from_terms(
            vec![
                (rational(2), rational(3)),
                (rational(2), rational(-3)),
                (rational(1), rational(5)),
            ],
            order,
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.coefficient(&rational(1)), rational(5));
        assert_eq!(s.coefficient(&rational(2)), rational(0));
    }

    #[test]
    fn display_is_readable() {
        let g = geometric_power(-1, &rational(4));
        assert_eq!(alloc::format!("{g}"), "1 - x + O(x^4)");
    }
}

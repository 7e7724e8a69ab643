//! Exact rational parsing and rendering for degree-table parameters.
//!
//! Couplings on the command line are given in units of `8π`, either as
//! integers (`2`), fractions (`3/2`), or finite decimals (`1.5`); all three
//! forms convert exactly to rationals so the degree arithmetic stays exact.

use mfe_degree::series::Rational;
use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Parse one rational in integer, fraction, or finite-decimal form.
pub fn parse_rational(src: &str) -> Result<Rational, String> {
    let s = src.trim();
    if s.is_empty() {
        return Err("empty rational".to_string());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("malformed numerator in `{s}`"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("malformed denominator in `{s}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let (sign, int_digits) = match int_part.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, int_part.strip_prefix('+').unwrap_or(int_part)),
        };
        if !int_digits.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || (int_digits.is_empty() && frac_part.is_empty())
        {
            return Err(format!("malformed decimal `{s}`"));
        }
        let int_val: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().unwrap()
        };
        let frac_val: BigInt = if frac_part.is_empty() {
            BigInt::zero()
        } else {
            frac_part.parse().unwrap()
        };
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let mut value = Rational::new(int_val * &scale + frac_val, scale);
        if sign < 0 {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = s.parse().map_err(|_| format!("malformed rational `{s}`"))?;
    Ok(Rational::from_integer(n))
}

/// Parse a comma-separated list of rationals.
pub fn parse_rational_list(src: &str) -> Result<Vec<Rational>, String> {
    let items: Vec<&str> = src.split(',').collect();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(parse_rational(item)?);
    }
    if out.is_empty() {
        return Err("empty list".to_string());
    }
    Ok(out)
}

/// Canonical rendering: integers as plain integers, everything else as
/// `p/q` in lowest terms.
pub fn render_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_fraction_and_decimal_forms_agree() {
        let a = parse_rational("3/2").unwrap();
        let b = parse_rational("1.5").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_rational("2").unwrap(), Rational::from_integer(2.into()));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational("0.50").unwrap(), Rational::new(1.into(), 2.into()));
        assert_eq!(parse_rational(" 7/4 ").unwrap(), Rational::new(7.into(), 4.into()));
    }

    #[test]
    fn malformed_rationals_are_rejected()  {
        for bad in ["", "a", "1/0", "1.2.3", "1/2/3", ".", "--1", "1e3"] {
            assert!(parse_rational(bad).is_err(), "`{bad}` should fail");
        }
    }

    #[test]
    fn rendering_is_canonical() {
        assert_eq!(render_rational(&parse_rational("1.5").unwrap()), "3/2");
        assert_eq!(render_rational(&parse_rational("2").unwrap()), "2");
        assert_eq!(render_rational(&parse_rational("6/4").unwrap()), "3/2");
        assert_eq!(render_rational(&parse_rational("-2.5").unwrap()), "-5/2");
    }

    #[test]
    fn list_parsing() {
        let xs = parse_rational_list("0.5,1.5,7/2").unwrap();
        assert_eq!(xs.len(), 3);
        assert_eq!(xs[2], Rational::new(7.into(), 2.into()));
        assert!(parse_rational_list("1,,2").is_err());
    }
}

//! Coefficient scalars.
//!
//! Two instantiations are supported everywhere downstream: [`Rat`]
//! (arbitrary-precision rationals, for certification runs where residuals
//! must vanish identically) and `f64` (for sweeps and the matrix lab).
//! Genericity over [`Scalar`] makes mixing the two a type error rather than
//! a runtime condition.

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::str::FromStr;

/// Exact rational scalar.
pub type Rat = BigRational;

/// Field scalar for series coefficients, cumulants, and law parameters.
pub trait Scalar: Clone + PartialOrd + Debug + Display + Signed + 'static {
    /// True when arithmetic is exact (comparisons against zero are decisive).
    const EXACT: bool;

    fn from_int(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;

    /// Strict positivity (`> 0`); spelled out to avoid float signed-zero pitfalls.
    fn gt_zero(&self) -> bool {
        *self > Self::zero()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Parses `"3"`, `"-2.5"`, or `"3/4"` into an exact rational.
///
/// Decimal strings convert exactly (base-10 scaling), so CLI inputs like
/// `0.5` stay exact in rational mode. Scientific notation is not accepted.
pub fn parse_rational(s: &str) -> Result<Rat, ParseRationalError> {
    let s = s.trim();
    let err = || ParseRationalError(s.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(n, d));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let digits: String = [int_part, frac_part].concat();
    if digits.chars().any(|c| !c.is_ascii_digit()) {
        return Err(err());
    }
    let n = BigInt::from_str(&digits).map_err(|_| err())?;
    let den = BigInt::from(10u8).pow(frac_part.len() as u32);
    Ok(Rat::new(BigInt::from(sign) * n, den))
}

/// Error from [`parse_rational`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a rational number: {0:?}")]
pub struct ParseRationalError(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_integers_decimals_and_fractions() {
        assert_eq!(parse_rational("2").unwrap(), rat(2, 1));
        assert_eq!(parse_rational("-2").unwrap(), rat(-2, 1));
        assert_eq!(parse_rational("0.5").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-1.25").unwrap(), rat(-5, 4));
        assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-3/4").unwrap(), rat(-3, 4));
        assert_eq!(parse_rational(".5").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("2.").unwrap(), rat(2, 1));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1e3", "a", "1/0", "1.2.3", "--1", "."] {
            assert!(parse_rational(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn strict_positivity_distinguishes_zero() {
        assert!(Rat::from_int(1).gt_zero());
        assert!(!Rat::from_int(0).gt_zero());
        assert!(!Rat::from_int(-1).gt_zero());
        assert!(1.0f64.gt_zero());
        assert!(!0.0f64.gt_zero());
        assert!(!(-0.0f64).gt_zero());
    }
}

//! Truncated formal power series.
//!
//! A [`TruncatedSeries`] stores coefficients of 1, z, …, z^K and represents a
//! series known modulo z^{K+1}; K is the *order*. Binary operations truncate
//! to the smaller operand's order, so a result never claims more accuracy
//! than its inputs support. Multiplication is the plain O(K²) convolution,
//! which is the right trade-off at the orders used here (K ≲ 64).
//!
//! Compositional reversion uses Newton iteration with the accurate-order
//! doubling step, seeded with z/c₁.

use crate::scalar::Scalar;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Errors from series operations whose mathematical preconditions fail.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("reciprocal requires a nonzero constant term")]
    ZeroConstantTerm,
    #[error("composition requires the inner series to have zero constant term")]
    InnerConstantTerm,
    #[error("reversion requires f(0) = 0 and f'(0) != 0")]
    NotReversible,
    #[error("series is not divisible by z^{0}", power)]
    NotDivisible { power: usize },
}

/// A power series truncated at order K (coefficients of z^0 … z^K).
#[derive(Clone, PartialEq, Eq)]
pub struct TruncatedSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> TruncatedSeries<T> {
    /// Series with the given coefficients; the order is `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least a constant term");
        Self { coeffs }
    }

    /// The zero series at the given order.
    pub fn zero(order: usize) -> Self {
        Self::new(vec![T::zero(); order + 1])
    }

    /// Constant series c at the given order.
    pub fn constant(c: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = c;
        Self::new(coeffs)
    }

    /// The identity series z at the given order (requires order >= 1).
    pub fn identity(order: usize) -> Self {
        Self::monomial(T::one(), 1, order)
    }

    /// c·z^n at the given order (requires n <= order).
    pub fn monomial(c: T, n: usize, order: usize) -> Self {
        assert!(n <= order, "monomial degree {n} exceeds order {order}");
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    /// c0 + c1·z at the given order (requires order >= 1).
    pub fn linear(c0: T, c1: T, order: usize) -> Self {
        assert!(order >= 1);
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = c0;
        coeffs[1] = c1;
        Self::new(coeffs)
    }

    /// Truncation order K.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of z^n (requires n <= order).
    pub fn coeff(&self, n: usize) -> &T {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Restricts to a smaller order (requires k <= order).
    pub fn truncated(&self, k: usize) -> Self {
        assert!(k <= self.order(), "cannot extend order {} to {k}", self.order());
        Self::new(self.coeffs[..=k].to_vec())
    }

    /// Zero-pads up to `k`. Only sound when the series is an exact polynomial
    /// (all omitted coefficients really are zero), e.g. closed-form factors.
    pub fn pad_polynomial(&self, k: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(k + 1, T::zero());
        Self::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::new(self.coeffs.iter().map(|x| x.clone() * c.clone()).collect())
    }

    /// Multiplication by z^m; the order grows by m (no information is lost).
    pub fn shift_up(&self, m: usize) -> Self {
        let mut coeffs = vec![T::zero(); m];
        coeffs.extend(self.coeffs.iter().cloned());
        Self::new(coeffs)
    }

    /// Division by z^m; fails unless the low coefficients vanish. The order
    /// shrinks by m (requires m <= order).
    pub fn shift_down(&self, m: usize) -> Result<Self, SeriesError> {
        assert!(m <= self.order());
        if self.coeffs[..m].iter().any(|c| !c.is_zero()) {
            return Err(SeriesError::NotDivisible { power: m });
        }
        Ok(Self::new(self.coeffs[m..].to_vec()))
    }

    /// Formal derivative; the order shrinks by one (requires order >= 1).
    pub fn derivative(&self) -> Self {
        assert!(self.order() >= 1);
        Self::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| T::from_int(i as i64 + 1) * c.clone())
                .collect(),
        )
    }

    /// 1/self; fails when the constant term is zero.
    pub fn reciprocal(&self) -> Result<Self, SeriesError> {
        if self.coeffs[0].is_zero() {
            return Err(SeriesError::ZeroConstantTerm);
        }
        let k = self.order();
        let inv0 = T::one() / self.coeffs[0].clone();
        let mut out = vec![T::zero(); k + 1];
        out[0] = inv0.clone();
        for n in 1..=k {
            let mut acc = T::zero();
            for i in 1..=n {
                acc = acc + self.coeffs[i].clone() * out[n - i].clone();
            }
            out[n] = -acc * inv0.clone();
        }
        Ok(Self::new(out))
    }

    /// self ∘ inner, truncated at min(order, inner.order); fails when the
    /// inner constant term is nonzero.
    pub fn compose(&self, inner: &Self) -> Result<Self, SeriesError> {
        if !inner.coeffs[0].is_zero() {
            return Err(SeriesError::InnerConstantTerm);
        }
        let k = self.order().min(inner.order());
        let inner = inner.truncated(k);
        let mut res = Self::zero(k);
        for c in self.coeffs[..=k].iter().rev() {
            res = &res * &inner;
            res.coeffs[0] = res.coeffs[0].clone() + c.clone();
        }
        Ok(res)
    }

    /// Compositional inverse g with self(g(z)) = z + O(z^{K+1}); requires
    /// f(0) = 0 and f'(0) != 0.
    ///
    /// Newton steps g ← g − (f∘g − z)/(f'∘g) starting from z/c₁ double the
    /// accurate order each round; all arithmetic happens at the fixed working
    /// order K on the polynomial representative, which determines the
    /// reversion to the same order.
    pub fn revert(&self) -> Result<Self, SeriesError> {
        if self.order() < 1 || !self.coeffs[0].is_zero() || self.coeffs[1].is_zero() {
            return Err(SeriesError::NotReversible);
        }
        let k = self.order();
        let fprime = self.derivative().pad_polynomial(k);
        let mut g = Self::monomial(T::one() / self.coeffs[1].clone(), 1, k);
        let mut accurate = 1usize;
        while accurate < k {
            let fg = self.compose(&g)?;
            let err = &fg - &Self::identity(k);
            let fpg = fprime.compose(&g)?;
            let corr = &err * &fpg.reciprocal()?;
            g = &g - &corr;
            accurate *= 2;
        }
        Ok(g)
    }

    /// Largest |coefficient|, for residual reports.
    pub fn max_abs_coeff(&self) -> T {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn to_f64_series(&self) -> TruncatedSeries<f64> {
        TruncatedSeries::new(self.coeffs.iter().map(Scalar::to_f64).collect())
    }
}

impl TruncatedSeries<f64> {
    /// Horner evaluation of the truncating polynomial.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

impl<T: Scalar> Add for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;

    fn add(self, rhs: Self) -> TruncatedSeries<T> {
        let k = self.order().min(rhs.order());
        TruncatedSeries::new(
            (0..=k)
                .map(|i| self.coeffs[i].clone() + rhs.coeffs[i].clone())
                .collect(),
        )
    }
}

impl<T: Scalar> Sub for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;

    fn sub(self, rhs: Self) -> TruncatedSeries<T> {
        let k = self.order().min(rhs.order());
        TruncatedSeries::new(
            (0..=k)
                .map(|i| self.coeffs[i].clone() - rhs.coeffs[i].clone())
                .collect(),
        )
    }
}

impl<T: Scalar> Mul for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;

    fn mul(self, rhs: Self) -> TruncatedSeries<T> {
        let k = self.order().min(rhs.order());
        let mut out = vec![T::zero(); k + 1];
        for (i, a) in self.coeffs.iter().take(k + 1).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().take(k + 1 - i).enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        TruncatedSeries::new(out)
    }
}

impl<T: Scalar> Neg for &TruncatedSeries<T> {
    type Output = TruncatedSeries<T>;

    fn neg(self) -> TruncatedSeries<T> {
        TruncatedSeries::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }
}

impl<T: Scalar> fmt::Debug for TruncatedSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<T: Scalar> fmt::Display for TruncatedSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})·z")?,
                _ => write!(f, "({c})·z^{i}")?,
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.order() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    fn rs(coeffs: &[(i64, i64)]) -> TruncatedSeries<Rat> {
        TruncatedSeries::new(coeffs.iter().map(|&(n, d)| Rat::from_ratio(n, d)).collect())
    }

    fn ri(coeffs: &[i64]) -> TruncatedSeries<Rat> {
        TruncatedSeries::new(coeffs.iter().map(|&n| Rat::from_int(n)).collect())
    }

    #[test]
    fn product_truncates_to_smaller_order() {
        // (1+z)(1-z) at K=3 -> 1 - z^2
        let a = ri(&[1, 1, 0, 0]);
        let b = ri(&[1, -1, 0, 0]);
        assert_eq!(&a * &b, ri(&[1, 0, -1, 0]));
        // (1+z+z^2)(1+z) at K=2 -> 1 + 2z + 2z^2
        let a = ri(&[1, 1, 1]);
        let b = ri(&[1, 1, 0]);
        assert_eq!(&a * &b, ri(&[1, 2, 2]));
        // mixed orders: min rule
        let a = ri(&[1, 1, 1, 1, 1]);
        let b = ri(&[1, 1]);
        assert_eq!((&a * &b).order(), 1);
    }

    #[test]
    fn reciprocal_of_geometric_factors() {
        assert_eq!(ri(&[1, -1, 0, 0]).reciprocal().unwrap(), ri(&[1, 1, 1, 1]));
        assert_eq!(ri(&[1, 2, 0]).reciprocal().unwrap(), ri(&[1, -2, 4]));
        assert_eq!(
            ri(&[2, 0, 0]).reciprocal().unwrap(),
            rs(&[(1, 2), (0, 1), (0, 1)])
        );
        assert_eq!(
            ri(&[0, 1]).reciprocal(),
            Err(SeriesError::ZeroConstantTerm)
        );
    }

    #[test]
    fn reciprocal_is_two_sided_inverse() {
        let a = rs(&[(3, 1), (1, 2), (-2, 3), (1, 5), (4, 7)]);
        let inv = a.reciprocal().unwrap();
        assert_eq!(&a * &inv, TruncatedSeries::constant(Rat::from_int(1), 4));
    }

    #[test]
    fn composition_substitutes() {
        // geom(z^2) at K=4 -> 1 + z^2 + z^4
        let geom = ri(&[1, 1, 1, 1, 1]);
        let z2 = ri(&[0, 0, 1, 0, 0]);
        assert_eq!(geom.compose(&z2).unwrap(), ri(&[1, 0, 1, 0, 1]));
        // (z+z^2) o (z+z^2) at K=3 -> z + 2z^2 + 2z^3
        let f = ri(&[0, 1, 1, 0]);
        assert_eq!(f.compose(&f).unwrap(), ri(&[0, 1, 2, 2]));
        assert_eq!(
            geom.compose(&ri(&[1, 1])),
            Err(SeriesError::InnerConstantTerm)
        );
    }

    #[test]
    fn reversion_of_quadratic_gives_signed_catalans() {
        let f = ri(&[0, 1, 1, 0, 0]);
        assert_eq!(f.revert().unwrap(), ri(&[0, 1, -1, 2, -5]));
        assert_eq!(ri(&[0, 1, 1, 0, 0, 0]).revert().unwrap(), ri(&[0, 1, -1, 2, -5, 14]));
    }

    #[test]
    fn reversion_rejects_bad_leading_terms() {
        assert_eq!(ri(&[1, 1]).revert(), Err(SeriesError::NotReversible));
        assert_eq!(ri(&[0, 0, 1]).revert(), Err(SeriesError::NotReversible));
    }

    #[test]
    fn shifts_move_orders() {
        let a = ri(&[1, 2, 3]);
        let up = a.shift_up(2);
        assert_eq!(up, ri(&[0, 0, 1, 2, 3]));
        assert_eq!(up.order(), 4);
        assert_eq!(up.shift_down(2).unwrap(), a);
        assert_eq!(
            ri(&[1, 2]).shift_down(1),
            Err(SeriesError::NotDivisible { power: 1 })
        );
    }

    #[test]
    fn float_mode_matches_exact_mode() {
        let a = rs(&[(1, 3), (-7, 5), (2, 1), (1, 8)]);
        let b = rs(&[(2, 1), (1, 7), (-1, 2), (5, 3)]);
        let exact = (&a * &b).reciprocal().unwrap();
        let float = (&a.to_f64_series() * &b.to_f64_series()).reciprocal().unwrap();
        for (e, f) in exact.coeffs().iter().zip(float.coeffs()) {
            assert!((e.to_f64() - f).abs() <= 1e-12 * f.abs().max(1.0));
        }
    }
}

//! Formal transforms of compactly supported laws and their exchange
//! identities.
//!
//! Every transform here is a truncated power series manipulated exactly: the
//! additive transform `r` (shifted free-cumulant generating function), the
//! multiplicative transform `S`, the moment generating function `M`, and the
//! Cauchy transform `G` viewed through its expansion at infinity. The
//! conversions between them are compositional-inverse identities, so they are
//! implemented with series reversion and verified by *residual* functions
//! that return the defect series of each identity; a residual that is
//! identically zero through the truncation order is an exact certificate at
//! that order.
//!
//! The single analytic (floating-point) routine in this module is
//! [`cauchy_quadrature`], which integrates a spectral measure against the
//! Cauchy kernel and exists to cross-validate closed-form Cauchy transforms
//! on actual complex points rather than coefficientwise.

use crate::laws::SpectralMeasure;
use crate::ncpart::{CumulantSequence, MomentSequence};
use crate::scalar::Scalar;
use crate::series::{SeriesError, TruncatedSeries};
use num::complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformsError {
    #[error("the first cumulant is zero, so the additive transform cannot be inverted")]
    NonInvertibleR,
    #[error("the multiplicative transform needs a nonzero leading coefficient")]
    ZeroLeadingS,
    #[error("Cauchy transform evaluated on the spectrum at z = {0}")]
    OnSpectrum(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// The additive transform r(z) = Σ_{n≥0} κ_{n+1} zⁿ; coefficient n holds the
/// (n+1)-st free cumulant. Free additive convolution adds these series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RTransform<T: Scalar> {
    series: TruncatedSeries<T>,
}

impl<T: Scalar> RTransform<T> {
    pub fn from_cumulants(c: &CumulantSequence<T>) -> Self {
        Self {
            series: TruncatedSeries::new(c.values().to_vec()),
        }
    }

    pub fn from_series(series: TruncatedSeries<T>) -> Self {
        Self { series }
    }

    pub fn series(&self) -> &TruncatedSeries<T> {
        &self.series
    }

    pub fn order(&self) -> usize {
        self.series.order()
    }

    /// κ_n, available for 1 ≤ n ≤ order + 1.
    pub fn cumulant(&self, n: usize) -> &T {
        assert!(n >= 1, "cumulants are 1-indexed");
        self.series.coeff(n - 1)
    }

    pub fn cumulant_sequence(&self, label: char) -> CumulantSequence<T> {
        CumulantSequence::new(label, self.series.coeffs().to_vec())
    }

    /// Moments m₁ … m_{order+1} of the underlying law.
    pub fn moment_sequence(&self, label: char) -> MomentSequence<T> {
        self.cumulant_sequence(label).moments()
    }

    pub fn free_add(&self, other: &Self) -> Self {
        Self {
            series: &self.series + &other.series,
        }
    }
}

/// The multiplicative transform S(z) = Σ_{n≥0} s_n zⁿ with s₀ ≠ 0. Free
/// multiplicative convolution multiplies these series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct STransform<T: Scalar> {
    series: TruncatedSeries<T>,
}

impl<T: Scalar> STransform<T> {
    pub fn new(series: TruncatedSeries<T>) -> Result<Self, TransformsError> {
        if series.coeff(0).is_zero() {
            return Err(TransformsError::ZeroLeadingS);
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &TruncatedSeries<T> {
        &self.series
    }

    pub fn order(&self) -> usize {
        self.series.order()
    }

    pub fn free_mul(&self, other: &Self) -> Self {
        Self {
            series: &self.series * &other.series,
        }
    }
}

/// Moment generating function M(z) = Σ_{n≥1} m_n zⁿ (no constant term).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MgfSeries<T: Scalar> {
    series: TruncatedSeries<T>,
}

impl<T: Scalar> MgfSeries<T> {
    pub fn from_moments(m: &MomentSequence<T>) -> Self {
        let mut coeffs = vec![T::zero()];
        coeffs.extend(m.values().iter().cloned());
        Self {
            series: TruncatedSeries::new(coeffs),
        }
    }

    pub fn series(&self) -> &TruncatedSeries<T> {
        &self.series
    }

    pub fn order(&self) -> usize {
        self.series.order()
    }

    /// m_n for 0 ≤ n ≤ order, with m₀ = 1 by normalization.
    pub fn moment(&self, n: usize) -> T {
        if n == 0 {
            T::one()
        } else {
            self.series.coeff(n).clone()
        }
    }
}

/// Cauchy transform through its expansion at infinity:
/// G(z) = Σ_{n≥0} m_n z^{−(n+1)}. Coefficient n of the stored series is m_n,
/// so the leading coefficient is the total mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauchySeries<T: Scalar> {
    moments: TruncatedSeries<T>,
}

impl<T: Scalar> CauchySeries<T> {
    pub fn from_moments(m: &MomentSequence<T>) -> Self {
        let mut coeffs = vec![T::one()];
        coeffs.extend(m.values().iter().cloned());
        Self {
            moments: TruncatedSeries::new(coeffs),
        }
    }

    /// The raw tail coefficients (index n ↦ m_n).
    pub fn moments(&self) -> &TruncatedSeries<T> {
        &self.moments
    }

    pub fn order(&self) -> usize {
        self.moments.order()
    }

    pub fn moment(&self, n: usize) -> &T {
        self.moments.coeff(n)
    }
}

/// S from r by reversion of R(z) = z·r(z): since R(z·S(z)) = z, the series
/// z·S(z) is the compositional inverse of R. Needs κ₁ ≠ 0.
pub fn s_from_r<T: Scalar>(r: &RTransform<T>) -> Result<STransform<T>, TransformsError> {
    if r.series.coeff(0).is_zero() {
        return Err(TransformsError::NonInvertibleR);
    }
    let big_r = r.series.shift_up(1);
    let inv = big_r.revert().expect("linear coefficient κ₁ is nonzero");
    let s = inv
        .shift_down(1)
        .expect("compositional inverse has no constant term");
    Ok(STransform { series: s })
}

/// r from S by the same identity read the other way: R is the compositional
/// inverse of z·S(z). Needs S(0) ≠ 0.
pub fn r_from_s<T: Scalar>(s: &STransform<T>) -> Result<RTransform<T>, TransformsError> {
    if s.series.coeff(0).is_zero() {
        return Err(TransformsError::ZeroLeadingS);
    }
    let zs = s.series.shift_up(1);
    let big_r = zs.revert().expect("linear coefficient S(0) is nonzero");
    let r = big_r
        .shift_down(1)
        .expect("compositional inverse has no constant term");
    Ok(RTransform { series: r })
}

/// Free additive convolution on the transform side.
pub fn free_add_convolve<T: Scalar>(a: &RTransform<T>, b: &RTransform<T>) -> RTransform<T> {
    a.free_add(b)
}

/// Free multiplicative convolution on the transform side.
pub fn free_mul_convolve<T: Scalar>(a: &STransform<T>, b: &STransform<T>) -> STransform<T> {
    a.free_mul(b)
}

/// Cauchy tail expansion generated from r via the cumulant→moment dictionary.
pub fn cauchy_from_r<T: Scalar>(r: &RTransform<T>) -> CauchySeries<T> {
    CauchySeries::from_moments(&r.moment_sequence('x'))
}

/// Residual of the additive/multiplicative exchange: R(z·S(z)) − z, truncated
/// to the common order. Identically zero iff r and S describe the same law
/// through that order.
pub fn str_residual<T: Scalar>(r: &RTransform<T>, s: &STransform<T>) -> TruncatedSeries<T> {
    let big_r = r.series.shift_up(1);
    let zs = s.series.shift_up(1);
    let k = big_r.order().min(zs.order());
    let composed = big_r
        .truncated(k)
        .compose(&zs.truncated(k))
        .expect("z·S(z) has no constant term");
    &composed - &TruncatedSeries::identity(k)
}

/// Residual of the Cauchy/additive exchange: G(r(z) + 1/z) − z, expanded
/// through the substitution 1/(r(z) + 1/z) = z/(1 + z·r(z)), which is a
/// bona-fide power series in z.
pub fn crr_residual<T: Scalar>(g: &CauchySeries<T>, r: &RTransform<T>) -> TruncatedSeries<T> {
    let one_plus_zr = &TruncatedSeries::constant(T::one(), r.order() + 1) + &r.series.shift_up(1);
    let u = one_plus_zr
        .reciprocal()
        .expect("constant term is 1")
        .shift_up(1)
        .truncated(r.order() + 1);
    let k = u.order().min(g.moments.order());
    let tail = g.moments.truncated(k).compose(&u.truncated(k)).expect("u has no constant term");
    let value = &u.truncated(k) * &tail;
    &value - &TruncatedSeries::identity(value.order())
}

/// Residual of the moment/multiplicative exchange: M(z·S(z)/(1+z)) − z.
pub fn msr_residual<T: Scalar>(m: &MgfSeries<T>, s: &STransform<T>) -> TruncatedSeries<T> {
    let k = m.order().min(s.order() + 1);
    let zs = s.series.shift_up(1).truncated(k);
    let one_plus_z = TruncatedSeries::linear(T::one(), T::one(), k);
    let inner = &zs * &one_plus_z.reciprocal().expect("constant term is 1");
    let composed = m
        .series
        .truncated(k)
        .compose(&inner)
        .expect("inner series has no constant term");
    &composed - &TruncatedSeries::identity(k)
}

/// Gauss–Legendre nodes and weights on [−1, 1], cached per order. Nodes are
/// found by Newton iteration from the Chebyshev initial guess and are
/// strictly interior, which downstream quadrature relies on (integrands may
/// blow up at interval endpoints).
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    assert!((2..=2048).contains(&n), "quadrature order {n} unsupported");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return Arc::clone(hit);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    let arc = Arc::new((nodes, weights));
    cache.lock().unwrap().insert(n, Arc::clone(&arc));
    arc
}

/// Numerical Cauchy transform ∫ dμ(x)/(z − x) of a spectral measure, by
/// Gauss–Legendre quadrature on the continuous part with order doubling until
/// the value stabilizes. Exists to check closed-form transforms pointwise.
/// Refuses points on the spectrum, where the integral is singular.
pub fn cauchy_quadrature(
    measure: &SpectralMeasure,
    z: Complex64,
) -> Result<Complex64, TransformsError> {
    if measure.touches_spectrum(z, 1e-9) {
        return Err(TransformsError::OnSpectrum(z.to_string()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for &(location, mass) in measure.atoms() {
        total += Complex64::new(mass, 0.0) / (z - Complex64::new(location, 0.0));
    }
    if measure.has_continuous() {
        let eval = |order: usize| {
            measure.integrate_continuous_complex(order, |x| {
                Complex64::new(1.0, 0.0) / (z - Complex64::new(x, 0.0))
            })
        };
        let mut order = 64;
        let mut value = eval(order);
        for _ in 0..5 {
            order *= 2;
            let refined = eval(order);
            let delta = (refined - value).norm();
            value = refined;
            if delta < 1e-13 * (1.0 + value.norm()) {
                break;
            }
        }
        total += value;
    }
    Ok(total)
}

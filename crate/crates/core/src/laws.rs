//! The two distinguished laws: free-Poisson (Marchenko–Pastur) and
//! free-binomial, with validators, exact transform-side data, spectral
//! measures, and the Askey–Wilson reparametrization of the free-binomial
//! family.
//!
//! Laws are generic over the scalar so the same constructors feed both the
//! exact rational pipelines and the floating-point Monte Carlo lab. Anything
//! spectral (densities, atoms, quadrature weights) is float-only and lives on
//! [`SpectralMeasure`].
//!
//! Both densities have square-root edge factors, so the continuous parts
//! carry their own pullback weight under x(t) = x₋ + 2ρ·cos²(t/2): the edge
//! factors become ρ·sin t exactly and the integrand seen by Gauss–Legendre
//! quadrature is smooth, even at a hard edge (support touching 0 or 1) where
//! the raw density diverges. The stable forms x − x₋ = 2ρ·cos²(t/2) and
//! x₊ − x = 2ρ·sin²(t/2) are used wherever cancellation could hurt.

use crate::ncpart::{CumulantSequence, MomentSequence};
use crate::scalar::Scalar;
use crate::series::TruncatedSeries;
use crate::transforms::{r_from_s, RTransform, STransform};
use num::complex::Complex64;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LawError {
    #[error("free-Poisson law needs rate > 0 and jump > 0 (got rate {rate}, jump {jump})")]
    InvalidPoisson { rate: String, jump: String },
    #[error(
        "(σ, θ) = ({sigma}, {theta}) lies on the boundary σ+θ = 1, \
         where only the discrete part of the law survives"
    )]
    BinomialBoundary { sigma: String, theta: String },
    #[error(
        "(σ, θ) = ({sigma}, {theta}) is outside the admissible region: \
         needs both (σ+θ)/(σ+θ−1) and σθ/(σ+θ−1) positive, got {ratio_sum} and {ratio_prod}"
    )]
    BinomialOutsideRegion {
        sigma: String,
        theta: String,
        ratio_sum: String,
        ratio_prod: String,
    },
    #[error(
        "(σ, θ) = ({sigma}, {theta}) is admissible but outside the density regime \
         σ > 0, θ > 0, σ+θ > 1; its continuous part leaves (0, 1) and is not evaluated here"
    )]
    BinomialDensityUndefined { sigma: String, theta: String },
    #[error("Askey–Wilson parameters (a, b) = ({a}, {b}) need ab < 1, ab ≠ 0, and a ≠ b")]
    AskeyWilsonInadmissible { a: f64, b: f64 },
    #[error("evaluation point {z} touches the spectrum (atom, branch point, or support)")]
    OnSpectrum { z: String },
    #[error("free convolution power needs p strictly inside (0, 1) and n ≥ 2 (got p = {p}, n = {n})")]
    InvalidBernoulli { p: String, n: usize },
}

/// Outcome of the free-binomial region test: the two defining ratios and the
/// verdicts derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDiagnostics<T> {
    pub ratio_sum: T,
    pub ratio_prod: T,
    pub admissible: bool,
    pub density_regime: bool,
}

/// Evaluates the free-binomial admissibility ratios (σ+θ)/(σ+θ−1) and
/// σθ/(σ+θ−1). The law exists iff both are positive; spectral evaluation
/// additionally needs σ > 0, θ > 0, σ+θ > 1 so that the continuous part
/// stays inside (0, 1).
pub fn fb_validate<T: Scalar>(sigma: &T, theta: &T) -> Result<RegionDiagnostics<T>, LawError> {
    let s = sigma.clone() + theta.clone();
    let denom = s.clone() - T::one();
    if denom.is_zero() {
        return Err(LawError::BinomialBoundary {
            sigma: sigma.to_string(),
            theta: theta.to_string(),
        });
    }
    let ratio_sum = s.clone() / denom.clone();
    let ratio_prod = sigma.clone() * theta.clone() / denom;
    let admissible = ratio_sum.gt_zero() && ratio_prod.gt_zero();
    let density_regime =
        admissible && sigma.gt_zero() && theta.gt_zero() && (s - T::one()).gt_zero();
    Ok(RegionDiagnostics {
        ratio_sum,
        ratio_prod,
        admissible,
        density_regime,
    })
}

/// Free-Poisson (Marchenko–Pastur) law with rate λ > 0 and jump size α > 0.
/// Free cumulants are κ_n = λαⁿ; the spectral measure has an atom of mass
/// 1−λ at 0 when λ < 1 and a density on [α(1−√λ)², α(1+√λ)²].
#[derive(Debug, Clone, PartialEq)]
pub struct FreePoissonLaw<T> {
    rate: T,
    jump: T,
}

impl<T: Scalar> FreePoissonLaw<T> {
    pub fn new(rate: T, jump: T) -> Result<Self, LawError> {
        if !rate.gt_zero() || !jump.gt_zero() {
            return Err(LawError::InvalidPoisson {
                rate: rate.to_string(),
                jump: jump.to_string(),
            });
        }
        Ok(Self { rate, jump })
    }

    pub fn rate(&self) -> &T {
        &self.rate
    }

    pub fn jump(&self) -> &T {
        &self.jump
    }

    /// κ_n = λαⁿ for n = 1..=k.
    pub fn cumulants(&self, k: usize, label: char) -> CumulantSequence<T> {
        let mut values = Vec::with_capacity(k);
        let mut power = T::one();
        for _ in 0..k {
            power = power * self.jump.clone();
            values.push(self.rate.clone() * power.clone());
        }
        CumulantSequence::new(label, values)
    }

    pub fn moments(&self, k: usize, label: char) -> MomentSequence<T> {
        self.cumulants(k, label).moments()
    }

    /// r(z) = λα/(1−αz) truncated at the given order.
    pub fn r_transform(&self, order: usize) -> RTransform<T> {
        RTransform::from_series(TruncatedSeries::new(
            self.cumulants(order + 1, 'v').values().to_vec(),
        ))
    }

    /// S(z) = 1/(αλ + αz) truncated at the given order.
    pub fn s_transform(&self, order: usize) -> STransform<T> {
        let denom = TruncatedSeries::linear(
            self.jump.clone() * self.rate.clone(),
            self.jump.clone(),
            order,
        );
        STransform::new(denom.reciprocal().expect("αλ > 0"))
            .expect("leading coefficient 1/(αλ) is nonzero")
    }

    pub fn to_float(&self) -> FreePoissonLaw<f64> {
        FreePoissonLaw {
            rate: self.rate.to_f64(),
            jump: self.jump.to_f64(),
        }
    }
}

impl FreePoissonLaw<f64> {
    /// Endpoints of the continuous support, α(1∓√λ)².
    pub fn support(&self) -> (f64, f64) {
        let root = self.rate.sqrt();
        (
            self.jump * (1.0 - root) * (1.0 - root),
            self.jump * (1.0 + root) * (1.0 + root),
        )
    }

    /// Density of the continuous part at x (0 outside the open support).
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        ((hi - x) * (x - lo)).sqrt() / (2.0 * std::f64::consts::PI * self.jump * x)
    }

    pub fn measure(&self) -> SpectralMeasure {
        let (lo, hi) = self.support();
        let rho = (hi - lo) / 2.0;
        let jump = self.jump;
        let law = self.clone();
        let mut atoms = Vec::new();
        if self.rate < 1.0 {
            atoms.push((0.0, 1.0 - self.rate));
        }
        let weight = move |t: f64| {
            let x = lo + 2.0 * rho * (t / 2.0).cos().powi(2);
            rho * rho * t.sin().powi(2) / (2.0 * std::f64::consts::PI * jump * x)
        };
        SpectralMeasure::new(
            atoms,
            Some(ContinuousPart {
                lo,
                hi,
                density: Arc::new(move |x| law.density(x)),
                weight: Arc::new(weight),
            }),
        )
    }
}

/// Density of the free-Poisson law at x — thin convenience wrapper.
pub fn mp_density(x: f64, law: &FreePoissonLaw<f64>) -> f64 {
    law.density(x)
}

/// Free-binomial law on the admissible region G = { (σ+θ)/(σ+θ−1) > 0,
/// σθ/(σ+θ−1) > 0 }. Spectral evaluation is restricted to σ > 0, θ > 0,
/// σ+θ > 1, where the measure is (1−σ)⁺δ₀ + (1−θ)⁺δ₁ plus a density on
/// (x₋, x₊) ⊂ [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBinomialLaw<T> {
    sigma: T,
    theta: T,
}

impl<T: Scalar> FreeBinomialLaw<T> {
    pub fn new(sigma: T, theta: T) -> Result<Self, LawError> {
        let diag = fb_validate(&sigma, &theta)?;
        if !diag.admissible {
            return Err(LawError::BinomialOutsideRegion {
                sigma: sigma.to_string(),
                theta: theta.to_string(),
                ratio_sum: diag.ratio_sum.to_string(),
                ratio_prod: diag.ratio_prod.to_string(),
            });
        }
        Ok(Self { sigma, theta })
    }

    pub fn sigma(&self) -> &T {
        &self.sigma
    }

    pub fn theta(&self) -> &T {
        &self.theta
    }

    pub fn diagnostics(&self) -> RegionDiagnostics<T> {
        fb_validate(&self.sigma, &self.theta).expect("validated at construction")
    }

    /// S(z) = (σ+θ+z)/(σ+z) truncated at the given order. σ ≠ 0 on G.
    pub fn s_transform(&self, order: usize) -> STransform<T> {
        let numer = TruncatedSeries::linear(
            self.sigma.clone() + self.theta.clone(),
            T::one(),
            order,
        );
        let denom = TruncatedSeries::linear(self.sigma.clone(), T::one(), order);
        STransform::new(&numer * &denom.reciprocal().expect("σ ≠ 0 on G"))
            .expect("leading coefficient (σ+θ)/σ is nonzero on G")
    }

    /// Free cumulants κ₁..κ_k, through inversion of the S-series. The mean is
    /// κ₁ = 1/S(0) = σ/(σ+θ).
    pub fn cumulants(&self, k: usize, label: char) -> CumulantSequence<T> {
        assert!(k >= 1);
        let r = r_from_s(&self.s_transform(k.max(2) - 1)).expect("S(0) ≠ 0 on G");
        CumulantSequence::new(label, r.series().coeffs()[..k].to_vec())
    }

    /// Exact moments m₁..m_k by the transform route (no square roots enter).
    pub fn moments(&self, k: usize, label: char) -> MomentSequence<T> {
        self.cumulants(k, label).moments()
    }

    pub fn to_float(&self) -> FreeBinomialLaw<f64> {
        FreeBinomialLaw {
            sigma: self.sigma.to_f64(),
            theta: self.theta.to_f64(),
        }
    }
}

impl FreeBinomialLaw<f64> {
    fn require_density_regime(&self) -> Result<(), LawError> {
        let diag = self.diagnostics();
        if !diag.density_regime {
            return Err(LawError::BinomialDensityUndefined {
                sigma: self.sigma.to_string(),
                theta: self.theta.to_string(),
            });
        }
        Ok(())
    }

    /// Endpoints x∓ = (√(σ(s−1))/s ∓ √θ/s)² of the continuous support,
    /// s = σ+θ. Density regime only.
    pub fn support(&self) -> Result<(f64, f64), LawError> {
        self.require_density_regime()?;
        let s = self.sigma + self.theta;
        let a = (self.sigma * (s - 1.0)).sqrt() / s;
        let b = self.theta.sqrt() / s;
        Ok(((a - b) * (a - b), (a + b) * (a + b)))
    }

    /// Density of the continuous part at x (0 outside the open support).
    pub fn density(&self, x: f64) -> Result<f64, LawError> {
        let (lo, hi) = self.support()?;
        if x <= lo || x >= hi || x <= 0.0 || x >= 1.0 {
            return Ok(0.0);
        }
        let s = self.sigma + self.theta;
        Ok(s * ((x - lo) * (hi - x)).sqrt() / (2.0 * std::f64::consts::PI * x * (1.0 - x)))
    }

    pub fn measure(&self) -> Result<SpectralMeasure, LawError> {
        let (lo, hi) = self.support()?;
        let rho = (hi - lo) / 2.0;
        let s = self.sigma + self.theta;
        let mut atoms = Vec::new();
        if self.sigma > 0.0 && self.sigma < 1.0 {
            atoms.push((0.0, 1.0 - self.sigma));
        }
        if self.theta > 0.0 && self.theta < 1.0 {
            atoms.push((1.0, 1.0 - self.theta));
        }
        let law = self.clone();
        let weight = move |t: f64| {
            let half = t / 2.0;
            let x = lo + 2.0 * rho * half.cos().powi(2);
            let one_minus_x = (1.0 - hi) + 2.0 * rho * half.sin().powi(2);
            s * rho * rho * t.sin().powi(2)
                / (2.0 * std::f64::consts::PI * x * one_minus_x)
        };
        Ok(SpectralMeasure::new(
            atoms,
            Some(ContinuousPart {
                lo,
                hi,
                density: Arc::new(move |x| law.density(x).unwrap_or(0.0)),
                weight: Arc::new(weight),
            }),
        ))
    }

    /// Closed-form Cauchy transform
    /// G(z) = [(σ+θ−2)z + 1−σ ± √disc] / (2z(1−z)); the square-root branch is
    /// not globally one sign, so it is selected per point: in the open upper
    /// half-plane the value with negative imaginary part is the transform of
    /// a positive measure, the lower half-plane goes by conjugation, and real
    /// points off the spectrum are reached by continuation from above.
    pub fn cauchy_closed(&self, z: Complex64) -> Result<Complex64, LawError> {
        self.require_density_regime()?;
        let measure = self.measure()?;
        if measure.touches_spectrum(z, 1e-9) {
            return Err(LawError::OnSpectrum { z: z.to_string() });
        }
        if z.im > 0.0 {
            Ok(self.cauchy_upper(z))
        } else if z.im < 0.0 {
            Ok(self.cauchy_upper(z.conj()).conj())
        } else {
            // Continuation: approach the real point from above.
            let mut im = 1.0;
            let mut value = self.cauchy_upper(Complex64::new(z.re, im));
            while im > 1e-12 {
                im *= 0.5;
                value = self.cauchy_nearest(Complex64::new(z.re, im), value);
            }
            Ok(Complex64::new(value.re, 0.0))
        }
    }

    fn cauchy_candidates(&self, z: Complex64) -> (Complex64, Complex64) {
        let s = self.sigma + self.theta;
        let linear = (s - 2.0) * z + (1.0 - self.sigma);
        let disc = linear * linear
            - 4.0 * (1.0 - s) * z * (z - Complex64::new(1.0, 0.0));
        let root = disc.sqrt();
        let denom = 2.0 * z * (Complex64::new(1.0, 0.0) - z);
        ((linear + root) / denom, (linear - root) / denom)
    }

    /// Branch choice strictly inside the upper half-plane: exactly one
    /// candidate maps into the closed lower half-plane; if roundoff ever
    /// blurs that, fall back to continuation from a far-away anchor where
    /// G ≈ 1/z decides unambiguously.
    fn cauchy_upper(&self, z: Complex64) -> Complex64 {
        debug_assert!(z.im > 0.0);
        let (plus, minus) = self.cauchy_candidates(z);
        match (plus.im < 0.0, minus.im < 0.0) {
            (true, false) => plus,
            (false, true) => minus,
            _ => {
                let anchor_im = 10.0 * (1.0 + z.norm());
                let mut current = Complex64::new(z.re, anchor_im);
                let mut value = 1.0 / current; // G ≈ 1/z far away
                for step in 1..=64 {
                    let f = step as f64 / 64.0;
                    current = Complex64::new(z.re, anchor_im + (z.im - anchor_im) * f);
                    value = self.cauchy_nearest(current, value);
                }
                value
            }
        }
    }

    fn cauchy_nearest(&self, z: Complex64, previous: Complex64) -> Complex64 {
        let (plus, minus) = self.cauchy_candidates(z);
        if (plus - previous).norm() <= (minus - previous).norm() {
            plus
        } else {
            minus
        }
    }
}

/// Parameters (a, b) of the two-parameter Askey–Wilson measure; admissible
/// when ab < 1 and ab ≠ 0 (and a ≠ b, or the affine image degenerates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AskeyWilsonParams {
    pub a: f64,
    pub b: f64,
}

impl AskeyWilsonParams {
    pub fn is_admissible(&self) -> bool {
        let ab = self.a * self.b;
        ab < 1.0 && ab != 0.0 && self.a != self.b
    }
}

/// Image of the Askey–Wilson reparametrization: the free-binomial parameters
/// (θ, σ) together with the affine map Y = scale·X + offset carrying an
/// Askey–Wilson variable X onto the free-binomial variable Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwImage {
    pub theta: f64,
    pub sigma: f64,
    pub scale: f64,
    pub offset: f64,
}

/// (θ, σ) = ((1−ab)/(a(a−b)), (1−ab)/(b(b−a))), with the affine map
/// Y = a/((a−b)(ab−1)) · (2bX − (1+b²)). Invariant under (a,b) ↦ (−a,−b).
pub fn aw_map(p: &AskeyWilsonParams) -> Result<AwImage, LawError> {
    if !p.is_admissible() {
        return Err(LawError::AskeyWilsonInadmissible { a: p.a, b: p.b });
    }
    let (a, b) = (p.a, p.b);
    let one_minus_ab = 1.0 - a * b;
    let theta = one_minus_ab / (a * (a - b));
    let sigma = one_minus_ab / (b * (b - a));
    let pref = a / ((a - b) * (a * b - 1.0));
    Ok(AwImage {
        theta,
        sigma,
        scale: pref * 2.0 * b,
        offset: -pref * (1.0 + b * b),
    })
}

/// n-fold free additive convolution power of the two-point law
/// p·δ₀ + (1−p)·δ_{1/n}, computed by scaling the additive transform, plus
/// the free-binomial law (σ, θ) = (n(1−p), np) it is expected to equal.
pub struct BernoulliPower<T> {
    pub moments: MomentSequence<T>,
    pub law: FreeBinomialLaw<T>,
}

pub fn bernoulli_power<T: Scalar>(
    p: T,
    n: usize,
    k: usize,
) -> Result<BernoulliPower<T>, LawError> {
    if n < 2 || !p.gt_zero() || !(T::one() - p.clone()).gt_zero() {
        return Err(LawError::InvalidBernoulli {
            p: p.to_string(),
            n,
        });
    }
    // Moments of the two-point law: m_j = (1−p)·n^{−j}.
    let q = T::one() - p.clone();
    let inv_n = T::from_ratio(1, n as i64);
    let mut point_moments = Vec::with_capacity(k);
    let mut power = T::one();
    for _ in 0..k {
        power = power * inv_n.clone();
        point_moments.push(q.clone() * power.clone());
    }
    let kappas = MomentSequence::new('b', point_moments).cumulants();
    let scaled: Vec<T> = kappas
        .values()
        .iter()
        .map(|v| T::from_int(n as i64) * v.clone())
        .collect();
    let moments = CumulantSequence::new('b', scaled).moments();
    let sigma = T::from_int(n as i64) * q;
    let theta = T::from_int(n as i64) * p;
    let law = FreeBinomialLaw::new(sigma, theta)?;
    Ok(BernoulliPower { moments, law })
}

/// Discrete-plus-density spectral measure with a stable quadrature scheme for
/// its continuous part.
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    continuous: Option<ContinuousPart>,
}

/// Continuous component on [lo, hi], carrying both the pointwise density and
/// the pullback weight w(t) on t ∈ [0, π] under x(t) = lo + 2ρ·cos²(t/2)
/// (so ∫ f dμ_cont = ∫₀^π f(x(t))·w(t) dt, with the edge singularities
/// absorbed into w analytically).
pub struct ContinuousPart {
    lo: f64,
    hi: f64,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, continuous: Option<ContinuousPart>) -> Self {
        assert!(
            atoms.iter().all(|&(_, w)| w > 0.0),
            "atom masses must be positive"
        );
        Self { atoms, continuous }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn has_continuous(&self) -> bool {
        self.continuous.is_some()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.continuous.as_ref().map(|c| (c.lo, c.hi))
    }

    /// Density of the continuous part (0 outside it or when purely atomic).
    pub fn density_at(&self, x: f64) -> f64 {
        match &self.continuous {
            Some(c) if x > c.lo && x < c.hi => (c.density)(x),
            _ => 0.0,
        }
    }

    /// (x, density) pairs on an interior grid, for export/plotting.
    pub fn density_samples(&self, count: usize) -> Vec<(f64, f64)> {
        let Some(c) = &self.continuous else {
            return Vec::new();
        };
        (1..=count)
            .map(|i| {
                let x = c.lo + (c.hi - c.lo) * i as f64 / (count as f64 + 1.0);
                (x, (c.density)(x))
            })
            .collect()
    }

    /// ∫ f dμ_cont by Gauss–Legendre of the given order in the angle
    /// variable. Exact zero when there is no continuous part.
    pub fn integrate_continuous(&self, order: usize, f: impl Fn(f64) -> f64) -> f64 {
        let Some(c) = &self.continuous else {
            return 0.0;
        };
        let rho = (c.hi - c.lo) / 2.0;
        let (nodes, weights) = &*crate::transforms::gauss_legendre(order);
        let half_pi = std::f64::consts::FRAC_PI_2;
        nodes
            .iter()
            .zip(weights)
            .map(|(xi, wi)| {
                let t = half_pi * (xi + 1.0);
                let x = c.lo + 2.0 * rho * (t / 2.0).cos().powi(2);
                wi * half_pi * (c.weight)(t) * f(x)
            })
            .sum()
    }

    /// Complex-valued variant of [`Self::integrate_continuous`].
    pub fn integrate_continuous_complex(
        &self,
        order: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Complex64 {
        let Some(c) = &self.continuous else {
            return Complex64::new(0.0, 0.0);
        };
        let rho = (c.hi - c.lo) / 2.0;
        let (nodes, weights) = &*crate::transforms::gauss_legendre(order);
        let half_pi = std::f64::consts::FRAC_PI_2;
        nodes
            .iter()
            .zip(weights)
            .map(|(xi, wi)| {
                let t = half_pi * (xi + 1.0);
                let x = c.lo + 2.0 * rho * (t / 2.0).cos().powi(2);
                f(x) * (wi * half_pi * (c.weight)(t))
            })
            .sum()
    }

    /// Total mass: atoms plus continuous integral (1 for probability laws).
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum::<f64>()
            + self.integrate_continuous(240, |_| 1.0)
    }

    /// ∫ xⁿ dμ by quadrature.
    pub fn moment_numeric(&self, n: u32) -> f64 {
        self.atoms
            .iter()
            .map(|&(loc, w)| w * loc.powi(n as i32))
            .sum::<f64>()
            + self.integrate_continuous(240, |x| x.powi(n as i32))
    }

    /// μ((−∞, x]) — atoms at exactly x count fully.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|&&(loc, _)| loc <= x)
            .map(|&(_, w)| w)
            .sum();
        if let Some(c) = &self.continuous {
            if x >= c.hi {
                total += self.integrate_continuous(240, |_| 1.0);
            } else if x > c.lo {
                // {x(t) ≤ x} = {t ≥ t₀} under the decreasing parametrization.
                let rho = (c.hi - c.lo) / 2.0;
                let center = (c.hi + c.lo) / 2.0;
                let t0 = ((x - center) / rho).clamp(-1.0, 1.0).acos();
                let (nodes, weights) = &*crate::transforms::gauss_legendre(240);
                let half_len = (std::f64::consts::PI - t0) / 2.0;
                let mid = (std::f64::consts::PI + t0) / 2.0;
                total += nodes
                    .iter()
                    .zip(weights)
                    .map(|(xi, wi)| wi * half_len * (c.weight)(mid + half_len * xi))
                    .sum::<f64>();
            }
        }
        total
    }

    /// True when z is (numerically) an atom, a support endpoint, or a real
    /// point inside the continuous support — anywhere Cauchy-transform
    /// evaluation is ill-posed.
    pub fn touches_spectrum(&self, z: Complex64, tol: f64) -> bool {
        if z.im.abs() > tol {
            return false;
        }
        let x = z.re;
        if self
            .atoms
            .iter()
            .any(|&(loc, _)| (x - loc).abs() <= tol)
        {
            return true;
        }
        match &self.continuous {
            Some(c) => x >= c.lo - tol && x <= c.hi + tol,
            None => false,
        }
    }
}

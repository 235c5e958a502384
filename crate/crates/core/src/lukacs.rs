//! Both directions of the regression characterization connecting the
//! free-Poisson and free-binomial families.
//!
//! Throughout, `V` is a positive element with free-Poisson law, `U` is free
//! from `V` with a free-binomial law, and the pair of interest is
//! `X = V^{1/2} U V^{1/2}` together with `Y = V - X`. The forward direction
//! starts from the laws and certifies that `X` and `Y` are free with
//! free-Poisson marginals; the inverse direction starts from the two
//! conditional-moment constants
//!
//! > φ(Y · Xⁿ) = c₁ · φ(Xⁿ),          φ(Y² · Xⁿ) = c₂ · φ(Xⁿ)
//!
//! and recovers the unique pair of laws, certifying the recovery through a
//! tower of generating-function identities in the four trace sequences
//!
//! > αₙ = φ((VU)ⁿ),  βₙ = φ(V(VU)ⁿ),  γₙ = φ(V²(VU)ⁿ),  δₙ = φ(U(VU)ⁿ).
//!
//! Everything here runs over any [`Scalar`], so the same code path produces
//! exact rational certificates and fast float diagnostics. Residuals are
//! reported as truncated power series: a claim "identity I holds to order k"
//! is the statement that a concrete residual series is identically zero
//! through zᵏ, which for the rational scalar is an exact, replayable fact.
//!
//! The polynomial identities are checked in *cleared* form (multiplied
//! through by the relevant power of `z` or by `zD(z)`) so that no division
//! of series is ever needed and an inconsistent input surfaces as a nonzero
//! residual instead of an arithmetic error.

use std::fmt;

use thiserror::Error;

use crate::laws::{FreeBinomialLaw, FreePoissonLaw, LawError};
use crate::ncpart::{
    joint_cumulant, ColoredWord, CumulantMap, FreeMomentEngine, NcError,
};
use crate::scalar::Scalar;
use crate::series::TruncatedSeries;
use crate::transforms::{cauchy_from_r, r_from_s, CauchySeries, RTransform, STransform, TransformsError};

/// Largest order accepted for the exhaustive joint-cumulant sweep: the sweep
/// visits 2ᵏ words and sums over non-crossing partitions of each, so the cost
/// grows super-exponentially past this point.
const MAX_JOINT_ORDER: usize = 10;

/// Largest truncation order for the trace tables. Word length grows linearly
/// (the γ row at order k needs a word of 2k + 2 letters) and the rational
/// arithmetic stays comfortable well past the acceptance grid; the guard is
/// here so a typo in a caller fails fast instead of grinding.
const MAX_TABLE_ORDER: usize = 24;

/// Gap below which a float residual counts as zero. Exact scalars ignore
/// this and require literal zero.
const NUMERIC_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LukacsError {
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Transforms(#[from] TransformsError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error("word letter {0:?} is not one of the sandwich variables X, Y")]
    ForeignLetter(char),
    #[error("truncation order {got} is too small here; need at least {need}")]
    OrderTooSmall { got: usize, need: usize },
    #[error("truncation order {got} exceeds the supported bound {max}")]
    OrderTooLarge { got: usize, max: usize },
    #[error("rate-variable data is degenerate: {0}")]
    DegenerateRate(String),
    #[error("first regression constant must be positive, got c1 = {0}")]
    FirstConstantNotPositive(String),
    #[error("variance gap c2 - c1^2 must be positive, got c1 = {c1}, c2 = {c2}")]
    VarianceGapNotPositive { c1: String, c2: String },
    #[error(
        "table and constants disagree: beta_0 - alpha_1 = {gap} but c1 = {c1}; \
         the n = 0 regression instance fails"
    )]
    InconsistentConstants { gap: String, c1: String },
    #[error("recovered sigma = {0} is not positive; no admissible law pair matches these inputs")]
    RecoveredSigmaNotPositive(String),
}

fn negligible<T: Scalar>(x: &T) -> bool {
    if T::EXACT {
        x.is_zero()
    } else {
        x.to_f64().abs() <= NUMERIC_TOL
    }
}

fn pow_t<T: Scalar>(x: &T, n: usize) -> T {
    let mut acc = T::one();
    for _ in 0..n {
        acc = acc * x.clone();
    }
    acc
}

fn max_in_place<T: Scalar>(current: &mut T, candidate: T) {
    if candidate > *current {
        *current = candidate;
    }
}

/// Moment evaluator for words in the free pair (U, V), loaded with both
/// marginal cumulant sequences to the requested order.
fn engine_for<T: Scalar>(
    u: &FreeBinomialLaw<T>,
    v: &FreePoissonLaw<T>,
    order: usize,
) -> FreeMomentEngine<T> {
    let mut cumulants = CumulantMap::new();
    cumulants.insert(u.cumulants(order, 'U'));
    cumulants.insert(v.cumulants(order, 'V'));
    FreeMomentEngine::new(cumulants)
}

/// The four trace sequences of the pair (U, V), indexed from zero:
/// `alpha(n) = φ((VU)ⁿ)` (with `alpha(0) = 1`), `beta(n) = φ(V(VU)ⁿ)`,
/// `gamma(n) = φ(V²(VU)ⁿ)`, `delta(n) = φ(U(VU)ⁿ)`.
///
/// The table is pure data: nothing in it assumes the laws satisfy the
/// characterization hypotheses, so mismatched pairs produce honest tables
/// whose residuals are visibly nonzero downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedMomentTable<T> {
    alphas: Vec<T>,
    betas: Vec<T>,
    gammas: Vec<T>,
    deltas: Vec<T>,
}

impl<T: Scalar> MixedMomentTable<T> {
    /// Highest index n stored in each row.
    pub fn order(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alpha(&self, n: usize) -> &T {
        &self.alphas[n]
    }

    pub fn beta(&self, n: usize) -> &T {
        &self.betas[n]
    }

    pub fn gamma(&self, n: usize) -> &T {
        &self.gammas[n]
    }

    pub fn delta(&self, n: usize) -> &T {
        &self.deltas[n]
    }

    /// A(z) = Σ αₙ zⁿ as a series truncated at the table order.
    pub fn alpha_series(&self) -> TruncatedSeries<T> {
        TruncatedSeries::new(self.alphas.clone())
    }

    pub fn beta_series(&self) -> TruncatedSeries<T> {
        TruncatedSeries::new(self.betas.clone())
    }

    pub fn gamma_series(&self) -> TruncatedSeries<T> {
        TruncatedSeries::new(self.gammas.clone())
    }

    pub fn delta_series(&self) -> TruncatedSeries<T> {
        TruncatedSeries::new(self.deltas.clone())
    }

    /// The regression constants the table itself dictates through its first
    /// few entries: `c₁ = β₀ − α₁` and `c₂ = γ₀ − 2β₁ + α₂` (the n = 0
    /// instances of the two recurrences).
    pub fn implied_constants(&self) -> Result<RegressionConstants<T>, LukacsError> {
        if self.order() < 2 {
            return Err(LukacsError::OrderTooSmall {
                got: self.order(),
                need: 2,
            });
        }
        let c1 = self.betas[0].clone() - self.alphas[1].clone();
        let c2 =
            self.gammas[0].clone() - T::from_int(2) * self.betas[1].clone() + self.alphas[2].clone();
        Ok(RegressionConstants::new(c1, c2))
    }

    /// Overwrites one γ entry. Exists for sensitivity experiments: nudging a
    /// single table entry and watching which residuals move is the cheapest
    /// way to demonstrate that the identity checks have teeth.
    pub fn set_gamma(&mut self, n: usize, value: T) {
        self.gammas[n] = value;
    }
}

/// Fills the four trace rows up to index `k` by evaluating the alternating
/// words in the moment engine. Works for *any* parameter pair — no
/// rate-matching hypothesis is assumed — so it can feed both positive and
/// negative checks downstream.
pub fn compute_mixed_sequences<T: Scalar>(
    u: &FreeBinomialLaw<T>,
    v: &FreePoissonLaw<T>,
    k: usize,
) -> Result<MixedMomentTable<T>, LukacsError> {
    if k < 2 {
        return Err(LukacsError::OrderTooSmall { got: k, need: 2 });
    }
    if k > MAX_TABLE_ORDER {
        return Err(LukacsError::OrderTooLarge {
            got: k,
            max: MAX_TABLE_ORDER,
        });
    }
    // The γ row at index k reads a word with k + 2 copies of V, so the V
    // cumulants must reach that far.
    let engine = engine_for(u, v, k + 2);
    let trace = |head: &[char], n: usize| -> Result<T, NcError> {
        let mut letters = head.to_vec();
        for _ in 0..n {
            letters.push('V');
            letters.push('U');
        }
        if letters.is_empty() {
            Ok(T::one())
        } else {
            engine.moment(&ColoredWord::from_letters(&letters))
        }
    };
    let mut alphas = Vec::with_capacity(k + 1);
    let mut betas = Vec::with_capacity(k + 1);
    let mut gammas = Vec::with_capacity(k + 1);
    let mut deltas = Vec::with_capacity(k + 1);
    for n in 0..=k {
        alphas.push(trace(&[], n)?);
        betas.push(trace(&['V'], n)?);
        gammas.push(trace(&['V', 'V'], n)?);
        deltas.push(trace(&['U'], n)?);
    }
    Ok(MixedMomentTable {
        alphas,
        betas,
        gammas,
        deltas,
    })
}

/// The two conditional-moment constants. For a matched pair they equal
/// `c₁ = θα` and `c₂ = θ(θ+1)α²`; as plain data the struct also carries
/// deliberately wrong values for negative controls.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConstants<T> {
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> RegressionConstants<T> {
    pub fn new(c1: T, c2: T) -> Self {
        Self { c1, c2 }
    }

    /// The constants a matched pair (free-binomial `u`, free-Poisson `v`)
    /// forces: `c₁ = θα` and `c₂ = θ(θ+1)α²`.
    pub fn from_laws(u: &FreeBinomialLaw<T>, v: &FreePoissonLaw<T>) -> Self {
        let theta = u.theta().clone();
        let alpha = v.jump().clone();
        let c1 = theta.clone() * alpha.clone();
        let c2 = theta.clone() * (theta + T::one()) * alpha.clone() * alpha;
        Self { c1, c2 }
    }

    /// c₂ − c₁², the quantity that must be positive for the inverse map.
    pub fn variance_gap(&self) -> T {
        self.c2.clone() - self.c1.clone() * self.c1.clone()
    }

    /// Confirms `c₁ > 0` and `c₂ − c₁² > 0`, the existence conditions for
    /// the recovered parameter set.
    pub fn validate(&self) -> Result<(), LukacsError> {
        if !self.c1.gt_zero() {
            return Err(LukacsError::FirstConstantNotPositive(self.c1.to_string()));
        }
        if !self.variance_gap().gt_zero() {
            return Err(LukacsError::VarianceGapNotPositive {
                c1: self.c1.to_string(),
                c2: self.c2.to_string(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for RegressionConstants<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c1 = {}, c2 = {}", self.c1, self.c2)
    }
}

/// Residuals of the two scalar recurrences
/// `βₙ − αₙ₊₁ = c₁αₙ` and `γₙ − 2βₙ₊₁ + αₙ₊₂ = c₂αₙ`
/// over every index the table can reach.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceResiduals<T> {
    /// βₙ − αₙ₊₁ − c₁αₙ for n = 0 ..= K−1.
    pub first: Vec<T>,
    /// γₙ − 2βₙ₊₁ + αₙ₊₂ − c₂αₙ for n = 0 ..= K−2.
    pub second: Vec<T>,
}

impl<T: Scalar> RecurrenceResiduals<T> {
    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for r in self.first.iter().chain(self.second.iter()) {
            max_in_place(&mut best, r.abs());
        }
        best
    }

    pub fn all_zero(&self) -> bool {
        negligible(&self.max_abs())
    }
}

/// Evaluates both recurrences entrywise against the supplied constants.
pub fn check_regression_recurrences<T: Scalar>(
    table: &MixedMomentTable<T>,
    constants: &RegressionConstants<T>,
) -> RecurrenceResiduals<T> {
    let k = table.order();
    let mut first = Vec::with_capacity(k);
    for n in 0..k {
        first.push(
            table.beta(n).clone()
                - table.alpha(n + 1).clone()
                - constants.c1.clone() * table.alpha(n).clone(),
        );
    }
    let mut second = Vec::with_capacity(k.saturating_sub(1));
    for n in 0..k.saturating_sub(1) {
        second.push(
            table.gamma(n).clone() - T::from_int(2) * table.beta(n + 1).clone()
                + table.alpha(n + 2).clone()
                - constants.c2.clone() * table.alpha(n).clone(),
        );
    }
    RecurrenceResiduals { first, second }
}

/// The generating functions of the four trace rows plus `h = A − 1`, the
/// moment series of the product `VU`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingBundle<T: Scalar> {
    pub a: TruncatedSeries<T>,
    pub b: TruncatedSeries<T>,
    pub c: TruncatedSeries<T>,
    pub d: TruncatedSeries<T>,
    pub h: TruncatedSeries<T>,
}

/// Residual series for the full tower of identities the characterization
/// proof walks through, each stored in cleared (division-free) polynomial
/// form. A genuinely matched pair makes every series identically zero;
/// any perturbation of the table or the constants shows up as a nonzero
/// coefficient in at least one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResiduals<T: Scalar> {
    /// zB − (A − α₀) − c₁zA: the first recurrence, summed into series form.
    pub first_recurrence: TruncatedSeries<T>,
    /// z²C − 2z(B − β₀) + (A − α₀ − α₁z) − c₂z²A: the second recurrence.
    pub second_recurrence: TruncatedSeries<T>,
    /// A − 1 − zD·r(zD): the A row rebuilt from D and the rate's r-series.
    pub a_from_d: TruncatedSeries<T>,
    /// B − zD·r²(zD) − r(zD): the B row rebuilt from D.
    pub b_from_d: TruncatedSeries<T>,
    /// zD·C − (zD)²r³ − zD·r² − zD·r(r − β₀) − (r − β₀), with r = r(zD):
    /// the C row rebuilt from D, cleared by zD.
    pub c_from_d: TruncatedSeries<T>,
    /// zD·r² + (1 − D)·r − c₁(1 + zD·r): the balance obtained by feeding the
    /// rebuilt rows into the first recurrence.
    pub h_balance: TruncatedSeries<T>,
    /// h² − [(1 + c₁z)D − 1]h − c₁zD: quadratic relation between h and D.
    pub h_quadratic: TruncatedSeries<T>,
    /// h³ − ([(1 + c₁z)D − 1]² + c₁zD)h − [(1 + c₁z)D − 1]c₁zD: the cube of
    /// h expanded through the quadratic relation.
    pub h_cubic: TruncatedSeries<T>,
    /// h³ + 2(1 − D)h² − [β₀zD − 1 + 2D − D² + c₂z²D²]h
    /// − c₂z²D² − β₀zD(1 − 2D) − α₁zD²: the cube of h derived instead from
    /// the second recurrence.
    pub h_cubic_from_table: TruncatedSeries<T>,
    /// (h + 1)(c₁αzD + λα − c₁) − λαD: the closed form of h in terms of D
    /// and the recovered parameters, cleared of its denominator.
    pub h_closed_form: TruncatedSeries<T>,
    /// α(1 + c₁(1 − 1/λ)z)zD² − {1 + (α(1 − λ) + c₁(1 − 2/λ))z}D
    /// + 1 − c₁/(αλ): the quadratic equation satisfied by D alone.
    pub d_quadratic: TruncatedSeries<T>,
    /// h(1 − αzD) − λα·zD: h as a geometric function of zD, cleared.
    pub h_geometric: TruncatedSeries<T>,
    /// αzh² − {1 + (c₁ − α(1 + λ))z}h − (c₁ − αλ)z: the quadratic for h
    /// alone, the last stop before reading off the product's Ψ-series.
    pub h_quadratic_compact: TruncatedSeries<T>,
}

impl<T: Scalar> IdentityResiduals<T> {
    /// Name/series pairs in proof order, for reporting.
    pub fn all(&self) -> [(&'static str, &TruncatedSeries<T>); 13] {
        [
            ("first_recurrence", &self.first_recurrence),
            ("second_recurrence", &self.second_recurrence),
            ("a_from_d", &self.a_from_d),
            ("b_from_d", &self.b_from_d),
            ("c_from_d", &self.c_from_d),
            ("h_balance", &self.h_balance),
            ("h_quadratic", &self.h_quadratic),
            ("h_cubic", &self.h_cubic),
            ("h_cubic_from_table", &self.h_cubic_from_table),
            ("h_closed_form", &self.h_closed_form),
            ("d_quadratic", &self.d_quadratic),
            ("h_geometric", &self.h_geometric),
            ("h_quadratic_compact", &self.h_quadratic_compact),
        ]
    }

    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for (_, series) in self.all() {
            max_in_place(&mut best, series.max_abs_coeff());
        }
        best
    }

    pub fn all_zero(&self) -> bool {
        negligible(&self.max_abs())
    }
}

/// Builds the generating bundle from a trace table and the r-series of the
/// rate variable `V`, and evaluates the whole identity tower.
///
/// The constants `c₁, c₂` are read off the table itself and the parameters
/// `α, λ` off the first two coefficients of `r`, so the residuals measure the
/// *internal* consistency of the data: nothing is imported from the laws.
/// `r` must carry at least `order + 1` coefficients, because the identities
/// compose it with `zD(z)`.
pub fn build_generating_bundle<T: Scalar>(
    table: &MixedMomentTable<T>,
    rate_r: &RTransform<T>,
) -> Result<(GeneratingBundle<T>, IdentityResiduals<T>), LukacsError> {
    let m = table.order();
    if m < 2 {
        return Err(LukacsError::OrderTooSmall { got: m, need: 2 });
    }
    if rate_r.order() < m + 1 {
        return Err(LukacsError::OrderTooSmall {
            got: rate_r.order(),
            need: m + 1,
        });
    }
    let kappa1 = rate_r.cumulant(1).clone();
    let kappa2 = rate_r.cumulant(2).clone();
    if kappa1.is_zero() || kappa2.is_zero() {
        return Err(LukacsError::DegenerateRate(format!(
            "need nonzero first and second cumulants, got {kappa1} and {kappa2}"
        )));
    }
    // For a free-Poisson rate variable κₙ = λαⁿ, so the jump and rate are
    // recoverable from the first two cumulants alone.
    let alpha = kappa2.clone() / kappa1.clone();
    let lambda = kappa1.clone() / alpha.clone();
    let constants = table.implied_constants()?;
    let c1 = constants.c1.clone();
    let c2 = constants.c2.clone();

    let a = table.alpha_series();
    let b = table.beta_series();
    let c = table.gamma_series();
    let d = table.delta_series();
    let one = TruncatedSeries::constant(T::one(), m);
    let h = &a - &one;

    let alpha0 = a.coeff(0).clone();
    let alpha1 = a.coeff(1).clone();
    let beta0 = b.coeff(0).clone();

    let zd = d.shift_up(1);
    let r_zd = rate_r.series().truncated(m + 1).compose(&zd)?;
    let zd_r = &zd * &r_zd;
    let r2 = &r_zd * &r_zd;
    let r3 = &r2 * &r_zd;

    // zB − (A − α₀) − c₁zA
    let first_recurrence = {
        let zb = b.shift_up(1);
        let a_tail = &a - &TruncatedSeries::constant(alpha0.clone(), m);
        &(&zb - &a_tail) - &a.shift_up(1).scale(&c1)
    };

    // z²C − 2z(B − β₀) + (A − α₀ − α₁z) − c₂z²A
    let second_recurrence = {
        let z2c = c.shift_up(2);
        let zb_tail = (&b - &TruncatedSeries::constant(beta0.clone(), m))
            .shift_up(1)
            .scale(&T::from_int(2));
        let a_poly = &a - &TruncatedSeries::linear(alpha0.clone(), alpha1.clone(), m);
        &(&(&z2c - &zb_tail) + &a_poly) - &a.shift_up(2).scale(&c2)
    };

    // A − 1 − zD·r(zD)
    let a_from_d = &h - &zd_r;

    // B − zD·r²(zD) − r(zD)
    let b_from_d = &(&b - &(&zd * &r2)) - &r_zd;

    // zD·C − (zD)²r³ − zD·r² − zD·r(r − β₀) − (r − β₀)
    let c_from_d = {
        let r_tail = &r_zd - &TruncatedSeries::constant(beta0.clone(), m + 1);
        let t1 = &zd * &c;
        let t2 = &(&zd * &zd) * &r3;
        let t3 = &zd * &r2;
        let t4 = &zd_r * &r_tail;
        &(&(&(&t1 - &t2) - &t3) - &t4) - &r_tail
    };

    // zD·r² + (1 − D)·r − c₁(1 + zD·r)
    let h_balance = {
        let t1 = &zd * &r2;
        let t2 = &(&one - &d) * &r_zd;
        let t3 = (&one + &zd_r).scale(&c1);
        &(&t1 + &t2) - &t3
    };

    // bracket = (1 + c₁z)D − 1, shared by the next two residuals
    let bracket = &(&TruncatedSeries::linear(T::one(), c1.clone(), m) * &d) - &one;
    let czd = zd.scale(&c1);
    let h2 = &h * &h;
    let h3 = &h2 * &h;

    // h² − bracket·h − c₁zD
    let h_quadratic = &(&h2 - &(&bracket * &h)) - &czd;

    // h³ − (bracket² + c₁zD)h − bracket·c₁zD
    let h_cubic = {
        let coeff = &(&bracket * &bracket) + &czd;
        &(&h3 - &(&coeff * &h)) - &(&bracket * &czd)
    };

    // h³ + 2(1 − D)h² − [β₀zD − 1 + 2D − D² + c₂z²D²]h
    //   − c₂z²D² − β₀zD(1 − 2D) − α₁zD²
    let h_cubic_from_table = {
        let z2d2 = &zd * &zd;
        let mid = &(&(&(&zd.scale(&beta0) - &one) + &d.scale(&T::from_int(2))) - &(&d * &d))
            + &z2d2.scale(&c2);
        let rhs = &(&z2d2.scale(&c2)
            + &(&zd * &(&one - &d.scale(&T::from_int(2)))).scale(&beta0))
            + &(&zd * &d).scale(&alpha1);
        &(&(&h3 + &(&(&one - &d).scale(&T::from_int(2)) * &h2)) - &(&mid * &h)) - &rhs
    };

    // (h + 1)(c₁αzD + λα − c₁) − λαD
    let h_closed_form = {
        let lam_alpha = lambda.clone() * alpha.clone();
        let lin = &zd.scale(&(c1.clone() * alpha.clone()))
            + &TruncatedSeries::constant(lam_alpha.clone() - c1.clone(), m + 1);
        &(&a * &lin) - &d.scale(&lam_alpha)
    };

    // α(1 + c₁(1 − 1/λ)z)zD² − {1 + (α(1 − λ) + c₁(1 − 2/λ))z}D + 1 − c₁/(αλ)
    let d_quadratic = {
        let one_t = T::one();
        let zd2 = &zd * &d;
        let f1 = TruncatedSeries::linear(
            alpha.clone(),
            alpha.clone() * c1.clone() * (one_t.clone() - one_t.clone() / lambda.clone()),
            m,
        );
        let f2 = TruncatedSeries::linear(
            one_t.clone(),
            alpha.clone() * (one_t.clone() - lambda.clone())
                + c1.clone() * (one_t.clone() - T::from_int(2) / lambda.clone()),
            m,
        );
        let f3 = TruncatedSeries::constant(
            one_t.clone() - c1.clone() / (alpha.clone() * lambda.clone()),
            m,
        );
        &(&(&f1 * &zd2) - &(&f2 * &d)) + &f3
    };

    // h(1 − αzD) − λα·zD
    let h_geometric = {
        let lam_alpha = lambda.clone() * alpha.clone();
        &(&h * &(&one - &zd.scale(&alpha))) - &zd.scale(&lam_alpha)
    };

    // αzh² − {1 + (c₁ − α(1 + λ))z}h − (c₁ − αλ)z
    let h_quadratic_compact = {
        let slope = c1.clone() - alpha.clone() * (T::one() + lambda.clone());
        let tail = c1.clone() - alpha.clone() * lambda.clone();
        let t1 = h2.shift_up(1).scale(&alpha);
        let t2 = &TruncatedSeries::linear(T::one(), slope, m) * &h;
        &(&t1 - &t2) - &TruncatedSeries::monomial(tail, 1, m)
    };

    let bundle = GeneratingBundle { a, b, c, d, h };
    let residuals = IdentityResiduals {
        first_recurrence,
        second_recurrence,
        a_from_d,
        b_from_d,
        c_from_d,
        h_balance,
        h_quadratic,
        h_cubic,
        h_cubic_from_table,
        h_closed_form,
        d_quadratic,
        h_geometric,
        h_quadratic_compact,
    };
    Ok((bundle, residuals))
}

/// Expands a word in the sandwich variables into signed words in (U, V).
///
/// `X` stands for `V^{1/2} U V^{1/2}` and `Y` for `V − X`; multiplying out
/// the `Y`s gives 2^{#Y} signed words over {X, V}, and under a trace every
/// half-power of `V` pairs with a neighbouring half across the cyclic seam,
/// so each term is equivalent to an honest word in whole powers of U and V:
///
/// * `X`  ↦ `U V` (one term, φ-equivalent to `VU`),
/// * `XY` ↦ `U V²` − `U V U V`,
/// * `X²` ↦ `U V U V`.
///
/// Terms that contain no `X` at all collapse to a pure power of `V`.
pub fn xy_word_reduce(w: &ColoredWord) -> Result<Vec<(i64, ColoredWord)>, LukacsError> {
    let letters = w.expanded();
    if letters.is_empty() {
        return Err(NcError::EmptyWord.into());
    }
    for &c in &letters {
        if c != 'X' && c != 'Y' {
            return Err(LukacsError::ForeignLetter(c));
        }
    }
    Ok(xy_reduce_letters(&letters))
}

fn xy_reduce_letters(letters: &[char]) -> Vec<(i64, ColoredWord)> {
    let y_positions: Vec<usize> = (0..letters.len()).filter(|&i| letters[i] == 'Y').collect();
    let mut terms = Vec::with_capacity(1 << y_positions.len());
    for mask in 0..(1u64 << y_positions.len()) {
        let mut sign = 1i64;
        let mut branch = letters.to_vec();
        for (bit, &pos) in y_positions.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                branch[pos] = 'X';
                sign = -sign;
            } else {
                branch[pos] = 'V';
            }
        }
        terms.push((sign, sandwich_to_uv(&branch)));
    }
    terms
}

/// Rewrites a word over {X, V} as a cyclic word in U and whole powers of V,
/// counting V in half-units so the sandwich halves can be merged exactly.
fn sandwich_to_uv(branch: &[char]) -> ColoredWord {
    #[derive(Clone, Copy, PartialEq)]
    enum Tok {
        U,
        Halves(usize),
    }
    let mut tokens = Vec::with_capacity(3 * branch.len());
    for &c in branch {
        match c {
            'X' => {
                tokens.push(Tok::Halves(1));
                tokens.push(Tok::U);
                tokens.push(Tok::Halves(1));
            }
            'V' => tokens.push(Tok::Halves(2)),
            _ => unreachable!("branch letters are X or V"),
        }
    }
    let first_u = match tokens.iter().position(|t| *t == Tok::U) {
        Some(i) => i,
        None => {
            // No X in this term: a pure whole power of V.
            let halves: usize = tokens
                .iter()
                .map(|t| match t {
                    Tok::Halves(h) => *h,
                    Tok::U => 0,
                })
                .sum();
            debug_assert!(halves % 2 == 0);
            return ColoredWord::new(vec![('V', halves / 2)]);
        }
    };
    tokens.rotate_left(first_u);
    let mut runs = vec![('U', 1)];
    let mut halves = 0usize;
    for tok in &tokens[1..] {
        match tok {
            Tok::Halves(h) => halves += h,
            Tok::U => {
                debug_assert!(halves % 2 == 0 && halves > 0);
                runs.push(('V', halves / 2));
                runs.push(('U', 1));
                halves = 0;
            }
        }
    }
    debug_assert!(halves % 2 == 0 && halves > 0);
    runs.push(('V', halves / 2));
    ColoredWord::new(runs)
}

/// φ of a word in the sandwich variables, evaluated by reduction to (U, V)
/// words and summation of the signed engine moments.
pub fn xy_moment<T: Scalar>(
    w: &ColoredWord,
    engine: &FreeMomentEngine<T>,
) -> Result<T, LukacsError> {
    let terms = xy_word_reduce(w)?;
    sum_signed_moments(&terms, engine).map_err(Into::into)
}

fn sum_signed_moments<T: Scalar>(
    terms: &[(i64, ColoredWord)],
    engine: &FreeMomentEngine<T>,
) -> Result<T, NcError> {
    let mut total = T::zero();
    for (sign, term) in terms {
        let m = engine.moment(term)?;
        total = if *sign >= 0 { total + m } else { total - m };
    }
    Ok(total)
}

/// Internal oracle for the joint-cumulant recursion: words reaching it were
/// generated over {X, Y}, so reduction cannot fail.
fn xy_moment_nc<T: Scalar>(
    w: &ColoredWord,
    engine: &FreeMomentEngine<T>,
) -> Result<T, NcError> {
    let terms = xy_reduce_letters(&w.expanded());
    sum_signed_moments(&terms, engine)
}

/// Outcome of the forward direction: hypothesis flags plus the extreme
/// deviations found in the exhaustive cumulant sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FreenessCertificate<T> {
    /// Order of the sweep: every word in X, Y up to this length was checked.
    pub order: usize,
    /// Whether the rate of `V` equals σ + θ, the matching the sandwich
    /// construction needs.
    pub rate_matches_sum: bool,
    /// Whether (σ, θ) sits in the regime where the binomial factor has its
    /// spectrum in [0, 1] (σ > 0, θ > 0, σ + θ > 1).
    pub density_regime: bool,
    /// Largest |joint cumulant| over words mixing X and Y.
    pub max_mixed_cumulant: T,
    /// Largest |κₙ(X) − σαⁿ| over n ≤ order.
    pub max_x_marginal_gap: T,
    /// Largest |κₙ(Y) − θαⁿ| over n ≤ order.
    pub max_y_marginal_gap: T,
    /// Number of genuinely mixed words inspected.
    pub mixed_words_checked: usize,
}

impl<T: Scalar> FreenessCertificate<T> {
    /// True when the hypotheses held and every deviation is (exactly or
    /// numerically) zero: X and Y are free with the predicted free-Poisson
    /// marginals to the checked order.
    pub fn passed(&self) -> bool {
        self.rate_matches_sum
            && self.density_regime
            && negligible(&self.max_mixed_cumulant)
            && negligible(&self.max_x_marginal_gap)
            && negligible(&self.max_y_marginal_gap)
    }
}

/// Forward direction: from a free-binomial `u` and free-Poisson `v`, sweep
/// every word in (X, Y) up to length `k` and certify that mixed joint
/// cumulants vanish while the marginal cumulants are κₙ(X) = σαⁿ and
/// κₙ(Y) = θαⁿ.
///
/// The sweep always runs, even when the hypotheses fail; a rate mismatch
/// then shows up as a nonzero mixed cumulant, which is exactly what a
/// negative control wants to see.
pub fn forward_check<T: Scalar>(
    u: &FreeBinomialLaw<T>,
    v: &FreePoissonLaw<T>,
    k: usize,
) -> Result<FreenessCertificate<T>, LukacsError> {
    if k < 2 {
        return Err(LukacsError::OrderTooSmall { got: k, need: 2 });
    }
    if k > MAX_JOINT_ORDER {
        return Err(LukacsError::OrderTooLarge {
            got: k,
            max: MAX_JOINT_ORDER,
        });
    }
    let sum = u.sigma().clone() + u.theta().clone();
    let rate_matches_sum = *v.rate() == sum;
    let density_regime = u.diagnostics().density_regime;
    // A length-k word in X, Y expands into UV-words holding at most k copies
    // of U and k + 1 of V; one extra order of margin is harmless.
    let engine = engine_for(u, v, k + 2);
    let alpha = v.jump().clone();
    let sigma = u.sigma().clone();
    let theta = u.theta().clone();

    let mut max_mixed = T::zero();
    let mut max_x = T::zero();
    let mut max_y = T::zero();
    let mut mixed_words_checked = 0usize;
    for n in 1..=k {
        for mask in 0..(1u64 << n) {
            let letters: Vec<char> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { 'Y' } else { 'X' })
                .collect();
            let word = ColoredWord::from_letters(&letters);
            let mut oracle = |w: &ColoredWord| xy_moment_nc(w, &engine);
            let kappa = joint_cumulant(&word, &mut oracle)?;
            let x_count = letters.iter().filter(|&&c| c == 'X').count();
            if x_count == n {
                let expected = sigma.clone() * pow_t(&alpha, n);
                max_in_place(&mut max_x, (kappa - expected).abs());
            } else if x_count == 0 {
                let expected = theta.clone() * pow_t(&alpha, n);
                max_in_place(&mut max_y, (kappa - expected).abs());
            } else {
                mixed_words_checked += 1;
                max_in_place(&mut max_mixed, kappa.abs());
            }
        }
    }
    Ok(FreenessCertificate {
        order: k,
        rate_matches_sum,
        density_regime,
        max_mixed_cumulant: max_mixed,
        max_x_marginal_gap: max_x,
        max_y_marginal_gap: max_y,
        mixed_words_checked,
    })
}

/// Residuals of the two projected conditional-moment identities evaluated
/// directly on traces: φ(Y·Xⁿ) − c₁φ(Xⁿ) and φ(Y²·Xⁿ) − c₂φ(Xⁿ).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMomentReport<T> {
    pub constants: RegressionConstants<T>,
    /// φ(Y·Xⁿ) − c₁φ(Xⁿ) for n = 0 ..= k−2.
    pub first: Vec<T>,
    /// φ(Y²·Xⁿ) − c₂φ(Xⁿ) for n = 0 ..= k−2.
    pub second: Vec<T>,
}

impl<T: Scalar> ConditionalMomentReport<T> {
    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        for r in self.first.iter().chain(self.second.iter()) {
            max_in_place(&mut best, r.abs());
        }
        best
    }

    pub fn passed(&self) -> bool {
        negligible(&self.max_abs())
    }
}

/// Checks the projected form of the conditional-moment hypotheses with the
/// constants the laws dictate (c₁ = θα, c₂ = θ(θ+1)α²), for all n with
/// n + 2 ≤ k. A mismatched rate leaves visible nonzero residuals.
pub fn conditional_moment_check<T: Scalar>(
    u: &FreeBinomialLaw<T>,
    v: &FreePoissonLaw<T>,
    k: usize,
) -> Result<ConditionalMomentReport<T>, LukacsError> {
    if k < 2 {
        return Err(LukacsError::OrderTooSmall { got: k, need: 2 });
    }
    if k > MAX_TABLE_ORDER {
        return Err(LukacsError::OrderTooLarge {
            got: k,
            max: MAX_TABLE_ORDER,
        });
    }
    let engine = engine_for(u, v, k + 2);
    let constants = RegressionConstants::from_laws(u, v);
    let phi = |letters: &[char]| -> Result<T, LukacsError> {
        if letters.is_empty() {
            Ok(T::one())
        } else {
            let terms = xy_reduce_letters(letters);
            sum_signed_moments(&terms, &engine).map_err(Into::into)
        }
    };
    let mut first = Vec::with_capacity(k - 1);
    let mut second = Vec::with_capacity(k - 1);
    for n in 0..=k - 2 {
        let xn: Vec<char> = std::iter::repeat('X').take(n).collect();
        let phi_xn = phi(&xn)?;
        let mut yxn = vec!['Y'];
        yxn.extend_from_slice(&xn);
        let mut y2xn = vec!['Y', 'Y'];
        y2xn.extend_from_slice(&xn);
        first.push(phi(&yxn)? - constants.c1.clone() * phi_xn.clone());
        second.push(phi(&y2xn)? - constants.c2.clone() * phi_xn);
    }
    Ok(ConditionalMomentReport {
        constants,
        first,
        second,
    })
}

/// Everything the inverse direction recovers from (c₁, c₂, β₀, α₁): the four
/// parameters, both laws, and the transform chain used to certify them.
#[derive(Debug, Clone)]
pub struct InverseSolution<T: Scalar> {
    pub lambda: T,
    pub alpha: T,
    pub sigma: T,
    pub theta: T,
    pub poisson: FreePoissonLaw<T>,
    pub binomial: FreeBinomialLaw<T>,
    /// r-series of the rate variable V.
    pub rate_r: RTransform<T>,
    /// Compositional inverse χ of the product VU's moment series, in closed
    /// form z / ((1 + z)(αλ − c₁ + αz)); the product's S-transform is
    /// (1 + z)χ(z)/z, and reverting χ recovers the product's moments.
    pub product_chi: TruncatedSeries<T>,
    /// S-transform of the product VU: 1 / (αλ − c₁ + αz).
    pub product_s: STransform<T>,
    /// S-transform of V: 1 / (αλ + αz).
    pub rate_s: STransform<T>,
    /// S-transform of U: 1 + c₁ / (αλ − c₁ + αz).
    pub factor_s: STransform<T>,
    /// Cauchy 1/z-series of U, rebuilt from `factor_s` alone.
    pub factor_cauchy: CauchySeries<T>,
    /// Largest gap between the coefficients of `factor_cauchy` and the
    /// moment sequence of the recovered free-binomial law; exact zero in
    /// rational arithmetic.
    pub moment_match_gap: T,
}

impl<T: Scalar> InverseSolution<T> {
    /// True when the transform-chain moments of U agree with the recovered
    /// binomial law's own moment sequence through the working order.
    pub fn certified(&self) -> bool {
        negligible(&self.moment_match_gap)
    }
}

/// Inverse direction: from the regression constants and the two table
/// entries β₀, α₁, recover (λ, α, σ, θ) and both laws, then rebuild the
/// Cauchy series of U from the recovered S-transform and certify it against
/// the law's moments.
///
/// Recovery formulas: α = (c₂ − c₁²)/c₁, θ = c₁²/(c₂ − c₁²),
/// λ = c₁(α₁ + c₁ − 2β₀)/(c₁² − c₂), σ = λ − θ.
pub fn solve_inverse<T: Scalar>(
    constants: &RegressionConstants<T>,
    beta0: &T,
    alpha1: &T,
    k: usize,
) -> Result<InverseSolution<T>, LukacsError> {
    if k < 2 {
        return Err(LukacsError::OrderTooSmall { got: k, need: 2 });
    }
    constants.validate()?;
    let c1 = constants.c1.clone();
    let gap = beta0.clone() - alpha1.clone() - c1.clone();
    if !negligible(&gap) {
        return Err(LukacsError::InconsistentConstants {
            gap: (beta0.clone() - alpha1.clone()).to_string(),
            c1: c1.to_string(),
        });
    }
    let var_gap = constants.variance_gap();
    let alpha = var_gap.clone() / c1.clone();
    let theta = c1.clone() * c1.clone() / var_gap.clone();
    let lambda = c1.clone()
        * (T::from_int(2) * beta0.clone() - alpha1.clone() - c1.clone())
        / var_gap.clone();
    let sigma = lambda.clone() - theta.clone();
    if !sigma.gt_zero() {
        return Err(LukacsError::RecoveredSigmaNotPositive(sigma.to_string()));
    }
    let poisson = FreePoissonLaw::new(lambda.clone(), alpha.clone())?;
    let binomial = FreeBinomialLaw::new(sigma.clone(), theta.clone())?;

    let rate_r = poisson.r_transform(k);
    let rate_s = poisson.s_transform(k);
    // αλ − c₁ = ασ > 0, so the product's S-denominator has a nonzero
    // constant term and all three closed forms below are honest series.
    let shifted = lambda.clone() * alpha.clone() - c1.clone();
    let denom = TruncatedSeries::linear(shifted.clone(), alpha.clone(), k);
    let product_s = STransform::new(denom.reciprocal()?)?;
    let product_chi = {
        let full = (&TruncatedSeries::linear(T::one(), T::one(), k + 1)
            * &TruncatedSeries::linear(shifted.clone(), alpha.clone(), k + 1))
            .reciprocal()?;
        full.shift_up(1).truncated(k)
    };
    let factor_s_series =
        &TruncatedSeries::constant(T::one(), k) + &product_s.series().scale(&c1);
    let factor_s = STransform::new(factor_s_series)?;
    let factor_cauchy = cauchy_from_r(&r_from_s(&factor_s)?);

    let law_moments = binomial.moments(k, 'u');
    let mut moment_match_gap = T::zero();
    for n in 0..=k {
        let diff = (factor_cauchy.moment(n).clone() - law_moments.moment(n)).abs();
        max_in_place(&mut moment_match_gap, diff);
    }
    Ok(InverseSolution {
        lambda,
        alpha,
        sigma,
        theta,
        poisson,
        binomial,
        rate_r,
        product_chi,
        product_s,
        rate_s,
        factor_s,
        factor_cauchy,
        moment_match_gap,
    })
}

/// Full cycle: laws → trace table → implied constants → recovered laws,
/// with the parameter gaps and a fresh forward certificate on the recovered
/// pair.
#[derive(Debug, Clone)]
pub struct RoundtripReport<T: Scalar> {
    pub constants: RegressionConstants<T>,
    pub solution: InverseSolution<T>,
    pub sigma_gap: T,
    pub theta_gap: T,
    pub alpha_gap: T,
    pub lambda_gap: T,
    pub certificate: FreenessCertificate<T>,
}

impl<T: Scalar> RoundtripReport<T> {
    /// True when every recovered parameter matches the input (exactly for
    /// rational scalars) and the recovered pair passes the forward sweep.
    pub fn closed(&self) -> bool {
        negligible(&self.sigma_gap)
            && negligible(&self.theta_gap)
            && negligible(&self.alpha_gap)
            && negligible(&self.lambda_gap)
            && self.certificate.passed()
            && self.solution.certified()
    }
}

/// Runs the whole characterization loop on a parameter triple (σ, θ, α):
/// build the matched pair, extract the constants from the computed traces,
/// solve the inverse problem, compare, and re-certify the recovered laws.
/// The forward sweep is capped at order 6 — it is exponential in the order,
/// and a length-6 sweep already exercises every shape of mixed word.
pub fn roundtrip_characterization<T: Scalar>(
    sigma: T,
    theta: T,
    alpha: T,
    k: usize,
) -> Result<RoundtripReport<T>, LukacsError> {
    let order = k.max(2);
    let u = FreeBinomialLaw::new(sigma.clone(), theta.clone())?;
    let lambda = sigma.clone() + theta.clone();
    let v = FreePoissonLaw::new(lambda.clone(), alpha.clone())?;
    let table = compute_mixed_sequences(&u, &v, order)?;
    let constants = table.implied_constants()?;
    let solution = solve_inverse(&constants, table.beta(0), table.alpha(1), order)?;
    let sigma_gap = (solution.sigma.clone() - sigma).abs();
    let theta_gap = (solution.theta.clone() - theta).abs();
    let alpha_gap = (solution.alpha.clone() - alpha).abs();
    let lambda_gap = (solution.lambda.clone() - lambda).abs();
    let certificate = forward_check(&solution.binomial, &solution.poisson, order.min(6))?;
    Ok(RoundtripReport {
        constants,
        solution,
        sigma_gap,
        theta_gap,
        alpha_gap,
        lambda_gap,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpart::catalan;
    use crate::scalar::Rat;
    use num::Zero;
    use proptest::prelude::*;

    fn i(n: i64) -> Rat {
        Rat::from_int(n)
    }

    fn q(num: i64, den: i64) -> Rat {
        Rat::from_ratio(num, den)
    }

    fn symmetric_pair() -> (FreeBinomialLaw<Rat>, FreePoissonLaw<Rat>) {
        (
            FreeBinomialLaw::new(i(1), i(1)).unwrap(),
            FreePoissonLaw::new(i(2), i(1)).unwrap(),
        )
    }

    #[test]
    fn trace_table_matches_hand_computed_values_for_the_symmetric_pair() {
        let (u, v) = symmetric_pair();
        let t = compute_mixed_sequences(&u, &v, 4).unwrap();
        assert_eq!(*t.alpha(0), i(1));
        assert_eq!(*t.alpha(1), i(1));
        assert_eq!(*t.alpha(2), i(2));
        assert_eq!(*t.beta(0), i(2));
        assert_eq!(*t.beta(1), i(3));
        assert_eq!(*t.gamma(0), i(6));
        assert_eq!(*t.delta(0), q(1, 2));
        // Here VU is itself free-Poisson with rate 1 and jump 1, so its
        // moments are the Catalan numbers.
        for n in 0..=4usize {
            assert_eq!(*t.alpha(n), i(catalan(n) as i64));
        }
    }

    #[test]
    fn implied_constants_match_the_values_forced_by_the_laws() {
        let (u, v) = symmetric_pair();
        let t = compute_mixed_sequences(&u, &v, 3).unwrap();
        let implied = t.implied_constants().unwrap();
        assert_eq!(implied, RegressionConstants::from_laws(&u, &v));
        assert_eq!(implied.c1, i(1));
        assert_eq!(implied.c2, i(2));

        let u2 = FreeBinomialLaw::new(i(2), i(2)).unwrap();
        let v2 = FreePoissonLaw::new(i(4), i(1)).unwrap();
        let t2 = compute_mixed_sequences(&u2, &v2, 3).unwrap();
        let implied2 = t2.implied_constants().unwrap();
        assert_eq!(implied2.c1, i(2));
        assert_eq!(implied2.c2, i(6));
    }

    #[test]
    fn recurrences_hold_exactly_for_a_matched_pair() {
        let u = FreeBinomialLaw::new(i(2), i(3)).unwrap();
        let v = FreePoissonLaw::new(i(5), q(1, 2)).unwrap();
        let t = compute_mixed_sequences(&u, &v, 8).unwrap();
        let res = check_regression_recurrences(&t, &RegressionConstants::from_laws(&u, &v));
        assert!(res.all_zero(), "max residual {}", res.max_abs());
    }

    #[test]
    fn recurrences_detect_a_rate_mismatch() {
        let (u, _) = symmetric_pair();
        let v_wrong = FreePoissonLaw::new(q(5, 2), i(1)).unwrap();
        let t = compute_mixed_sequences(&u, &v_wrong, 6).unwrap();
        let res = check_regression_recurrences(&t, &RegressionConstants::from_laws(&u, &v_wrong));
        assert!(!res.all_zero());
    }

    #[test]
    fn generating_function_identities_all_vanish_for_matched_pairs() {
        for (sigma, theta, alpha) in [(i(1), i(1), i(1)), (i(2), i(3), q(1, 2))] {
            let u = FreeBinomialLaw::new(sigma.clone(), theta.clone()).unwrap();
            let v = FreePoissonLaw::new(sigma + theta, alpha).unwrap();
            let t = compute_mixed_sequences(&u, &v, 8).unwrap();
            let (bundle, residuals) = build_generating_bundle(&t, &v.r_transform(9)).unwrap();
            assert!(bundle.h.coeff(0).is_zero());
            assert_eq!(bundle.a.coeff(0), &i(1));
            for (name, series) in residuals.all() {
                assert!(series.is_zero(), "{name} residual is {series}");
            }
        }
    }

    #[test]
    fn a_perturbed_table_entry_breaks_the_identity_tower() {
        let (u, v) = symmetric_pair();
        let mut t = compute_mixed_sequences(&u, &v, 6).unwrap();
        t.set_gamma(0, i(7));
        let (_, residuals) = build_generating_bundle(&t, &v.r_transform(7)).unwrap();
        assert!(!residuals.all_zero());
        assert!(!residuals.second_recurrence.is_zero());
    }

    #[test]
    fn bundle_rejects_an_r_series_that_is_too_short() {
        let (u, v) = symmetric_pair();
        let t = compute_mixed_sequences(&u, &v, 6).unwrap();
        let err = build_generating_bundle(&t, &v.r_transform(5)).unwrap_err();
        assert!(matches!(err, LukacsError::OrderTooSmall { need: 7, .. }));
    }

    #[test]
    fn sandwich_words_reduce_to_the_expected_signed_uv_words() {
        let x = ColoredWord::parse("X").unwrap();
        assert_eq!(
            xy_word_reduce(&x).unwrap(),
            vec![(1, ColoredWord::parse("UV").unwrap())]
        );

        let xy = ColoredWord::parse("XY").unwrap();
        let mut terms = xy_word_reduce(&xy).unwrap();
        terms.sort_by_key(|(s, _)| -*s);
        assert_eq!(
            terms,
            vec![
                (1, ColoredWord::parse("UV2").unwrap()),
                (-1, ColoredWord::parse("UVUV").unwrap()),
            ]
        );

        let xx = ColoredWord::parse("X2").unwrap();
        assert_eq!(
            xy_word_reduce(&xx).unwrap(),
            vec![(1, ColoredWord::parse("UVUV").unwrap())]
        );

        let y = ColoredWord::parse("Y").unwrap();
        let mut y_terms = xy_word_reduce(&y).unwrap();
        y_terms.sort_by_key(|(s, _)| -*s);
        assert_eq!(
            y_terms,
            vec![
                (1, ColoredWord::parse("V").unwrap()),
                (-1, ColoredWord::parse("UV").unwrap()),
            ]
        );

        let bad = ColoredWord::parse("XZ").unwrap();
        assert!(matches!(
            xy_word_reduce(&bad),
            Err(LukacsError::ForeignLetter('Z'))
        ));
    }

    #[test]
    fn sandwich_moments_agree_with_the_trace_table() {
        let (u, v) = symmetric_pair();
        let t = compute_mixed_sequences(&u, &v, 5).unwrap();
        let engine = engine_for(&u, &v, 12);
        // φ(Xⁿ) = αₙ and φ(V·Xⁿ) = βₙ, so φ(Y·Xⁿ) = βₙ − αₙ₊₁.
        for n in 1..=4usize {
            let xn = ColoredWord::new(vec![('X', n)]);
            assert_eq!(xy_moment(&xn, &engine).unwrap(), *t.alpha(n));
            let mut letters = vec!['Y'];
            letters.extend(std::iter::repeat('X').take(n));
            let yxn = ColoredWord::from_letters(&letters);
            assert_eq!(
                xy_moment(&yxn, &engine).unwrap(),
                t.beta(n).clone() - t.alpha(n + 1).clone()
            );
        }
    }

    #[test]
    fn forward_certificate_passes_for_a_matched_pair() {
        let (u, v) = symmetric_pair();
        let cert = forward_check(&u, &v, 4).unwrap();
        assert!(cert.rate_matches_sum);
        assert!(cert.density_regime);
        assert!(cert.max_mixed_cumulant.is_zero());
        assert!(cert.max_x_marginal_gap.is_zero());
        assert!(cert.max_y_marginal_gap.is_zero());
        assert!(cert.mixed_words_checked > 0);
        assert!(cert.passed());
    }

    #[test]
    fn forward_marginals_follow_the_component_parameters() {
        // Asymmetric pair: σ = 2, θ = 1, α = 1, so κₙ(X) = 2 and κₙ(Y) = 1
        // for every n — which the certificate checks internally.
        let u = FreeBinomialLaw::new(i(2), i(1)).unwrap();
        let v = FreePoissonLaw::new(i(3), i(1)).unwrap();
        let cert = forward_check(&u, &v, 4).unwrap();
        assert!(cert.passed());

        // Directly: κ₁(X) = φ(X) = σα.
        let engine = engine_for(&u, &v, 8);
        let x = ColoredWord::parse("X").unwrap();
        assert_eq!(xy_moment(&x, &engine).unwrap(), i(2));
        let y = ColoredWord::parse("Y").unwrap();
        assert_eq!(xy_moment(&y, &engine).unwrap(), i(1));
    }

    #[test]
    fn forward_certificate_flags_a_rate_mismatch() {
        let (u, _) = symmetric_pair();
        let v_wrong = FreePoissonLaw::new(q(5, 2), i(1)).unwrap();
        let cert = forward_check(&u, &v_wrong, 4).unwrap();
        assert!(!cert.rate_matches_sum);
        assert!(!cert.max_mixed_cumulant.is_zero());
        assert!(!cert.passed());
    }

    #[test]
    fn conditional_moments_project_onto_the_constants() {
        let u = FreeBinomialLaw::new(i(2), i(2)).unwrap();
        let v = FreePoissonLaw::new(i(4), i(1)).unwrap();
        let report = conditional_moment_check(&u, &v, 6).unwrap();
        assert_eq!(report.constants.c1, i(2));
        assert_eq!(report.constants.c2, i(6));
        assert!(report.passed(), "max residual {}", report.max_abs());
    }

    #[test]
    fn conditional_moments_expose_a_rate_mismatch() {
        let u = FreeBinomialLaw::new(i(2), i(2)).unwrap();
        let v_wrong = FreePoissonLaw::new(q(41, 10), i(1)).unwrap();
        let report = conditional_moment_check(&u, &v_wrong, 5).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn inverse_solution_recovers_the_frozen_example() {
        let constants = RegressionConstants::new(i(1), i(2));
        let sol = solve_inverse(&constants, &i(2), &i(1), 8).unwrap();
        assert_eq!(sol.lambda, i(2));
        assert_eq!(sol.alpha, i(1));
        assert_eq!(sol.sigma, i(1));
        assert_eq!(sol.theta, i(1));
        assert!(sol.certified());

        // With αλ − c₁ = 1 and α = 1 the product's S-transform is 1/(1+z).
        for n in 0..=8usize {
            let expect = if n % 2 == 0 { i(1) } else { i(-1) };
            assert_eq!(*sol.product_s.series().coeff(n), expect);
        }
        // G_U starts 1/z + 1/(2z²) + 3/(8z³)...: the recovered binomial law
        // has mean 1/2.
        assert_eq!(*sol.factor_cauchy.moment(1), q(1, 2));
        assert_eq!(*sol.factor_cauchy.moment(2), q(3, 8));
        // Here χ = z/(1+z)², whose reversion is the Catalan moment series
        // of the product VU.
        assert_eq!(*sol.product_chi.coeff(1), i(1));
        assert_eq!(*sol.product_chi.coeff(2), i(-2));
        assert_eq!(*sol.product_chi.coeff(3), i(3));
        let product_moments = sol.product_chi.revert().unwrap();
        assert_eq!(*product_moments.coeff(1), i(1));
        assert_eq!(*product_moments.coeff(2), i(2));
        assert_eq!(*product_moments.coeff(3), i(5));
        assert_eq!(*product_moments.coeff(4), i(14));
    }

    #[test]
    fn inverse_rejects_inadmissible_constants() {
        assert!(matches!(
            solve_inverse(&RegressionConstants::new(i(0), i(2)), &i(2), &i(1), 4),
            Err(LukacsError::FirstConstantNotPositive(_))
        ));
        assert!(matches!(
            solve_inverse(&RegressionConstants::new(i(1), i(1)), &i(2), &i(1), 4),
            Err(LukacsError::VarianceGapNotPositive { .. })
        ));
        assert!(matches!(
            solve_inverse(&RegressionConstants::new(i(1), i(2)), &i(3), &i(1), 4),
            Err(LukacsError::InconsistentConstants { .. })
        ));
        // β₀ = 1, α₁ = 0 is consistent with c₁ = 1 but forces σ = 0.
        assert!(matches!(
            solve_inverse(&RegressionConstants::new(i(1), i(2)), &i(1), &i(0), 4),
            Err(LukacsError::RecoveredSigmaNotPositive(_))
        ));
    }

    #[test]
    fn parameter_formulas_admit_the_equivalent_split_forms() {
        // Two algebraically equal published forms for each of α and λ; both
        // are asserted so a future refactor cannot silently pick a wrong one.
        let u = FreeBinomialLaw::new(i(2), i(3)).unwrap();
        let v = FreePoissonLaw::new(i(5), q(1, 2)).unwrap();
        let t = compute_mixed_sequences(&u, &v, 4).unwrap();
        let cons = t.implied_constants().unwrap();
        let (c1, c2) = (cons.c1.clone(), cons.c2.clone());
        let (beta0, alpha1) = (t.beta(0).clone(), t.alpha(1).clone());

        let alpha_primary = (c2.clone() - c1.clone() * c1.clone()) / c1.clone();
        let alpha_split = (c1.clone() * c1.clone() - c2.clone())
            / (alpha1.clone() - beta0.clone());
        assert_eq!(alpha_primary, alpha_split);
        assert_eq!(alpha_primary, q(1, 2));

        let denom = c1.clone() * c1.clone() - c2.clone();
        let lambda_primary =
            c1.clone() * (alpha1.clone() + c1.clone() - i(2) * beta0.clone()) / denom.clone();
        let theta = c1.clone() * c1.clone() / (c2.clone() - c1.clone() * c1.clone());
        let lambda_split = theta
            + c1.clone() * (alpha1 + i(2) * c1.clone() - i(2) * beta0) / denom;
        assert_eq!(lambda_primary, lambda_split);
        assert_eq!(lambda_primary, i(5));
    }

    #[test]
    fn roundtrip_recovers_an_asymmetric_triple_exactly() {
        let report = roundtrip_characterization(i(2), i(3), q(1, 2), 6).unwrap();
        assert!(report.closed());
        assert_eq!(report.solution.sigma, i(2));
        assert_eq!(report.solution.theta, i(3));
        assert_eq!(report.solution.alpha, q(1, 2));
        assert_eq!(report.solution.lambda, i(5));
    }

    #[test]
    fn constants_scale_with_the_jump_as_first_and_second_order() {
        // Replacing α by 2α multiplies c₁ by 2 and c₂ by 4, while the
        // recovered shape parameters (σ, θ, λ) stay fixed.
        let u = FreeBinomialLaw::new(i(2), i(3)).unwrap();
        let v1 = FreePoissonLaw::new(i(5), q(1, 2)).unwrap();
        let v2 = FreePoissonLaw::new(i(5), i(1)).unwrap();
        let t1 = compute_mixed_sequences(&u, &v1, 4).unwrap();
        let t2 = compute_mixed_sequences(&u, &v2, 4).unwrap();
        let k1 = t1.implied_constants().unwrap();
        let k2 = t2.implied_constants().unwrap();
        assert_eq!(k2.c1, i(2) * k1.c1.clone());
        assert_eq!(k2.c2, i(4) * k1.c2.clone());

        let s1 = solve_inverse(&k1, t1.beta(0), t1.alpha(1), 4).unwrap();
        let s2 = solve_inverse(&k2, t2.beta(0), t2.alpha(1), 4).unwrap();
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.theta, s2.theta);
        assert_eq!(s1.lambda, s2.lambda);
        assert_eq!(i(2) * s1.alpha, s2.alpha);
    }

    #[test]
    fn float_lane_reports_sensitivity_to_a_perturbed_trace() {
        let u = FreeBinomialLaw::new(1.0_f64, 1.0).unwrap();
        let v = FreePoissonLaw::new(2.0_f64, 1.0).unwrap();
        let mut t = compute_mixed_sequences(&u, &v, 4).unwrap();
        let clean = solve_inverse(
            &t.implied_constants().unwrap(),
            &t.beta(0).clone(),
            &t.alpha(1).clone(),
            4,
        )
        .unwrap();
        assert!((clean.theta - 1.0).abs() < 1e-12);

        t.set_gamma(0, 6.0 + 1e-3);
        let bent = solve_inverse(
            &t.implied_constants().unwrap(),
            &t.beta(0).clone(),
            &t.alpha(1).clone(),
            4,
        )
        .unwrap();
        let shift = (bent.theta - 1.0).abs();
        assert!(
            shift > 1e-5 && shift < 1e-2,
            "θ moved by {shift} under a 1e-3 nudge of γ₀"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn roundtrip_is_the_identity_on_admissible_rational_triples(
            sn in 1i64..5,
            tn in 1i64..5,
            extra in 0i64..3,
            an in 1i64..4,
            ad in 1i64..4,
        ) {
            // σ + θ > 1 guaranteed by adding `extra + 1` to one numerator
            // when both raw parts are small.
            let sigma = q(sn, 2);
            let theta = q(tn + 2 * extra + 2, 2);
            let alpha = q(an, ad);
            let report = roundtrip_characterization(sigma.clone(), theta.clone(), alpha.clone(), 4).unwrap();
            prop_assert!(report.closed());
            prop_assert_eq!(report.solution.sigma, sigma);
            prop_assert_eq!(report.solution.theta, theta);
            prop_assert_eq!(report.solution.alpha, alpha);
        }
    }
}

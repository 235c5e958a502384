//! Finite-dimensional random-matrix counterpart of the exact machinery: the
//! free-Poisson / free-binomial pair realized as complex Wishart and matrix
//! beta ensembles.
//!
//! The construction mirrors the algebraic one exactly. Two independent
//! complex Wishart matrices `X` and `Y` (entry variance 1/N) play the
//! sandwich pair; their sum `V = X + Y` is again Wishart and converges to a
//! free-Poisson law with jump 1; and the matrix beta variable
//! `U = (X+Y)^{-1/2} X (X+Y)^{-1/2}` converges to the free-binomial law.
//! Since `V^{1/2} U V^{1/2} = X` *identically* at every finite dimension,
//! one simulation drives all four variables at once, and every exact trace
//! identity has a measurable finite-N shadow.
//!
//! Everything is deterministic: each (seed, replicate, role) triple maps to
//! its own counter-mode stream, so replicates are bit-identical regardless
//! of thread scheduling, and any reported number can be replayed from its
//! seed alone.
//!
//! Complex Hermitian eigenproblems are solved through the real 2N×2N
//! embedding `H = A + iB ↦ [[A, -B], [B, A]]`, which is a *-homomorphism
//! and doubles every eigenvalue; this keeps the linear algebra on the
//! well-trodden real symmetric path.

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::laws::{FreeBinomialLaw, FreePoissonLaw, LawError, SpectralMeasure};
use crate::lukacs::{xy_moment, LukacsError};
use crate::ncpart::{ColoredWord, CumulantMap, FreeMomentEngine, NcError};

pub type CMatrix = DMatrix<Complex64>;

/// Hard cap on the matrix dimension: past this the eigenproblems dominate
/// the run time and the asymptotic comparison gains nothing.
pub const MAX_DIMENSION: usize = 400;

/// Hard cap on trace-word length: the estimator variance grows quickly with
/// the word length and the exact side needs cumulants of matching depth.
pub const MAX_WORD_LEN: usize = 8;

const INV_SQRT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MatrixLabError {
    #[error("matrix dimension {0} is outside 1..={MAX_DIMENSION}")]
    DimensionOutOfRange(usize),
    #[error("a Wishart factor needs at least one column, got {0}")]
    EmptyColumns(usize),
    #[error(
        "rounded column counts p = {p}, q = {q} leave X + Y singular at dimension {n}; \
         need p + q > n - 1"
    )]
    ColumnsTooThin { p: usize, q: usize, n: usize },
    #[error("shape mismatch between summands: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("matrix is not numerically positive definite (smallest eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("inverse square root failed its self-check (residual {0:.3e})")]
    InverseSqrtBreakdown(f64),
    #[error("trace word length {0} exceeds {MAX_WORD_LEN}")]
    WordTooLong(usize),
    #[error("trace word letter {0:?} names no simulated matrix (use U, V, X, Y)")]
    UnknownMatrix(char),
    #[error(
        "word {0} mixes the factor letters U, V with the sandwich letters X, Y; \
         exact reference values exist only within one family"
    )]
    MixedFamilies(String),
    #[error("simulation needs at least one replicate")]
    NoReplicates,
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error(transparent)]
    Lukacs(#[from] LukacsError),
}

/// Dimensions of one complex Wishart draw: an N × p Gaussian rectangle Z
/// with independent CN(0, 1/N) entries, squared into W = ZZ*. With
/// p/N → y the spectrum converges to the free-Poisson law with rate y and
/// jump 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WishartSpec {
    pub dimension: usize,
    pub columns: usize,
}

impl WishartSpec {
    pub fn new(dimension: usize, columns: usize) -> Result<Self, MatrixLabError> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(MatrixLabError::DimensionOutOfRange(dimension));
        }
        if columns == 0 {
            return Err(MatrixLabError::EmptyColumns(columns));
        }
        Ok(Self { dimension, columns })
    }
}

/// Draws W = ZZ* with Z an N × p complex Gaussian rectangle whose real and
/// imaginary parts each have variance 1/(2N), so E|Z_ij|² = 1/N and
/// E (1/N) Tr W = p/N exactly at every finite N.
pub fn sample_complex_wishart(spec: &WishartSpec, rng: &mut impl Rng) -> CMatrix {
    let n = spec.dimension;
    let normal = Normal::new(0.0, (0.5 / n as f64).sqrt()).expect("positive std dev");
    let z = CMatrix::from_fn(n, spec.columns, |_, _| {
        Complex64::new(normal.sample(rng), normal.sample(rng))
    });
    &z * z.adjoint()
}

/// Column counts for the coupled pair: X gets `x_columns` ≈ σN and Y gets
/// `y_columns` ≈ θN, with the invertibility of X + Y guarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BetaPairSpec {
    pub dimension: usize,
    pub x_columns: usize,
    pub y_columns: usize,
}

impl BetaPairSpec {
    /// Rounds (σ, θ) to column counts at dimension N. The realized ratios
    /// [`Self::sigma_hat`] / [`Self::theta_hat`] are what the finite-N
    /// ensembles actually follow; callers comparing against exact laws
    /// should use those, not the requested parameters.
    pub fn from_parameters(
        sigma: f64,
        theta: f64,
        dimension: usize,
    ) -> Result<Self, MatrixLabError> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(MatrixLabError::DimensionOutOfRange(dimension));
        }
        let round_at_least_one = |v: f64| -> usize { (v * dimension as f64).round().max(1.0) as usize };
        let x_columns = round_at_least_one(sigma);
        let y_columns = round_at_least_one(theta);
        if x_columns + y_columns + 1 <= dimension {
            return Err(MatrixLabError::ColumnsTooThin {
                p: x_columns,
                q: y_columns,
                n: dimension,
            });
        }
        Ok(Self {
            dimension,
            x_columns,
            y_columns,
        })
    }

    /// Realized σ: the exact column ratio p/N.
    pub fn sigma_hat(&self) -> f64 {
        self.x_columns as f64 / self.dimension as f64
    }

    /// Realized θ: the exact column ratio q/N.
    pub fn theta_hat(&self) -> f64 {
        self.y_columns as f64 / self.dimension as f64
    }
}

/// One replicate of the coupled quadruple. `v = x + y` and
/// `u = (x+y)^{-1/2} x (x+y)^{-1/2}`, so `v^{1/2} u v^{1/2} = x` holds as a
/// matrix identity, not merely in distribution.
pub struct ReplicateMatrices {
    pub x: CMatrix,
    pub y: CMatrix,
    pub v: CMatrix,
    pub u: CMatrix,
}

/// The deterministic generator for one (replicate, role) lane: ChaCha8
/// seeded by the global seed with the stream counter `2·replicate + role`
/// (role 0 = the X factor, role 1 = the Y factor). Distinct lanes never
/// overlap, and the mapping is stable across thread schedules.
pub fn replicate_rng(seed: u64, replicate: u64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate * 2 + role);
    rng
}

/// Draws the coupled quadruple for one replicate index.
pub fn sample_replicate(
    spec: &BetaPairSpec,
    seed: u64,
    replicate: u64,
) -> Result<ReplicateMatrices, MatrixLabError> {
    let x_spec = WishartSpec::new(spec.dimension, spec.x_columns)?;
    let y_spec = WishartSpec::new(spec.dimension, spec.y_columns)?;
    let mut x_rng = replicate_rng(seed, replicate, 0);
    let mut y_rng = replicate_rng(seed, replicate, 1);
    let x = sample_complex_wishart(&x_spec, &mut x_rng);
    let y = sample_complex_wishart(&y_spec, &mut y_rng);
    let v = &x + &y;
    let u = beta_matrix_from_parts(&x, &y)?;
    Ok(ReplicateMatrices { x, y, v, u })
}

/// Real 2N×2N image of a complex Hermitian matrix under
/// A + iB ↦ [[A, -B], [B, A]].
fn embed(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i / n, j / n) {
            (0, 1) => -z.im,
            (1, 0) => z.im,
            _ => z.re,
        }
    })
}

/// Inverse of [`embed`], averaging the two redundant copies of each block.
fn unembed(m: &DMatrix<f64>) -> CMatrix {
    let n = m.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            (m[(i, j)] + m[(i + n, j + n)]) / 2.0,
            (m[(i + n, j)] - m[(i, j + n)]) / 2.0,
        )
    })
}

fn max_entry_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of a complex Hermitian matrix, ascending. The real embedding
/// doubles each eigenvalue, so the sorted 2N values are consumed in
/// adjacent pairs.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(embed(h));
    let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.into_iter().step_by(2).collect()
}

/// H^{-1/2} for a Hermitian positive definite H, through the real embedding,
/// with a mandatory self-check: the result must conjugate H back to the
/// identity within 1e-8 in the entrywise max norm.
pub fn hermitian_inv_sqrt(h: &CMatrix) -> Result<CMatrix, MatrixLabError> {
    let eig = nalgebra::SymmetricEigen::new(embed(h));
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let floor = scale * 1e-12;
    let smallest = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x));
    if smallest <= floor {
        return Err(MatrixLabError::NotPositiveDefinite(smallest));
    }
    let mapped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| 1.0 / x.sqrt()),
    );
    let real = &eig.eigenvectors * DMatrix::from_diagonal(&mapped) * eig.eigenvectors.transpose();
    let result = unembed(&real);
    let n = h.nrows();
    let residual = max_entry_abs(&(&result * h * &result - CMatrix::identity(n, n)));
    if residual > INV_SQRT_RESIDUAL_TOL {
        return Err(MatrixLabError::InverseSqrtBreakdown(residual));
    }
    Ok(result)
}

/// The matrix beta variable (x+y)^{-1/2} x (x+y)^{-1/2}, re-Hermitized
/// against rounding. Its spectrum lies in [0, 1] whenever x and y are
/// positive semidefinite with invertible sum; in particular y = 0 with
/// invertible x gives exactly the identity.
pub fn beta_matrix_from_parts(x: &CMatrix, y: &CMatrix) -> Result<CMatrix, MatrixLabError> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() || x.nrows() != x.ncols() {
        return Err(MatrixLabError::ShapeMismatch(
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
        ));
    }
    let w = hermitian_inv_sqrt(&(x + y))?;
    let u = &w * x * &w;
    Ok((&u + &u.adjoint()).scale(0.5))
}

/// Normalized trace of the word's matrix product: (1/N) Tr Π letters, with
/// U, V, X, Y naming the four simulated matrices. The imaginary part of the
/// trace is rounding noise for these Hermitian families and is dropped.
pub fn trace_mixed_moment(
    word: &ColoredWord,
    rep: &ReplicateMatrices,
) -> Result<f64, MatrixLabError> {
    if word.len() > MAX_WORD_LEN {
        return Err(MatrixLabError::WordTooLong(word.len()));
    }
    let n = rep.v.nrows();
    let mut acc = CMatrix::identity(n, n);
    for c in word.expanded() {
        let m = match c {
            'U' => &rep.u,
            'V' => &rep.v,
            'X' => &rep.x,
            'Y' => &rep.y,
            other => return Err(MatrixLabError::UnknownMatrix(other)),
        };
        acc *= m;
    }
    Ok(acc.trace().re / n as f64)
}

/// Kolmogorov–Smirnov distance between an ascending sample vector and a
/// reference measure's distribution function.
pub fn ks_statistic(sorted_samples: &[f64], measure: &SpectralMeasure) -> f64 {
    let n = sorted_samples.len();
    let mut d = 0.0f64;
    for (i, &x) in sorted_samples.iter().enumerate() {
        let f = measure.cdf(x);
        d = d.max(f - i as f64 / n as f64);
        d = d.max((i + 1) as f64 / n as f64 - f);
    }
    d
}

/// Which exact family a trace word belongs to.
enum WordFamily {
    /// Letters U, V: evaluated directly in the free-moment engine.
    Factor,
    /// Letters X, Y: evaluated by sandwich reduction.
    Sandwich,
}

fn word_family(word: &ColoredWord) -> Result<WordFamily, MatrixLabError> {
    let mut factor = false;
    let mut sandwich = false;
    for &(c, _) in word.runs() {
        match c {
            'U' | 'V' => factor = true,
            'X' | 'Y' => sandwich = true,
            other => return Err(MatrixLabError::UnknownMatrix(other)),
        }
    }
    match (factor, sandwich) {
        (true, true) => Err(MatrixLabError::MixedFamilies(word.to_string())),
        (_, true) => Ok(WordFamily::Sandwich),
        _ => Ok(WordFamily::Factor),
    }
}

/// Monte Carlo estimate of one trace word next to its exact asymptotic
/// value.
#[derive(Debug, Clone)]
pub struct TraceMomentEstimate {
    pub word: ColoredWord,
    pub mean: f64,
    pub std_error: f64,
    pub exact: f64,
    /// |mean − exact| in standard-error units; infinite if the sampler
    /// degenerated to zero variance away from the target.
    pub z_score: f64,
}

impl TraceMomentEstimate {
    pub fn within(&self, band: f64) -> bool {
        self.z_score <= band
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub sigma: f64,
    pub theta: f64,
    pub dimension: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Trace words to estimate; each must stay within one letter family.
    pub words: Vec<ColoredWord>,
}

impl SimulationPlan {
    /// Plan with the default word set: every cyclic class of words in U, V
    /// up to length 4.
    pub fn new(sigma: f64, theta: f64, dimension: usize, replicates: usize, seed: u64) -> Self {
        Self {
            sigma,
            theta,
            dimension,
            replicates,
            seed,
            words: default_trace_words(),
        }
    }
}

/// All cyclic classes of words in U and V of length 1 through 4, each
/// represented by its lexicographically least rotation — fifteen words.
pub fn default_trace_words() -> Vec<ColoredWord> {
    let mut words = Vec::new();
    for len in 1..=4usize {
        for mask in 0..(1u32 << len) {
            let letters: Vec<char> = (0..len)
                .map(|i| if mask >> i & 1 == 1 { 'V' } else { 'U' })
                .collect();
            let canonical = (0..len).all(|r| {
                let mut rotated = letters.clone();
                rotated.rotate_left(r);
                rotated >= letters
            });
            if canonical {
                words.push(ColoredWord::from_letters(&letters));
            }
        }
    }
    words
}

/// Everything a simulation run reports: the realized ensemble, the spectral
/// distances of both factors from their limit laws, and the trace-moment
/// comparison table.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub spec: BetaPairSpec,
    pub replicates: usize,
    pub seed: u64,
    /// KS distance of the pooled V spectrum from the free-Poisson limit.
    pub rate_ks: f64,
    /// KS distance of the pooled U spectrum from the free-binomial limit.
    pub factor_ks: f64,
    pub trace_moments: Vec<TraceMomentEstimate>,
    /// Pooled ascending eigenvalues of V across replicates.
    pub rate_eigenvalues: Vec<f64>,
    /// Pooled ascending eigenvalues of U across replicates.
    pub factor_eigenvalues: Vec<f64>,
}

impl SimulationReport {
    /// The standard acceptance gate: both KS distances under `ks_bound` and
    /// every trace estimate within `z_band` standard errors of exact.
    pub fn within_bands(&self, ks_bound: f64, z_band: f64) -> bool {
        self.rate_ks < ks_bound
            && self.factor_ks < ks_bound
            && self.trace_moments.iter().all(|t| t.within(z_band))
    }
}

struct ReplicateSummary {
    rate_eigs: Vec<f64>,
    factor_eigs: Vec<f64>,
    traces: Vec<f64>,
}

/// Runs the Monte Carlo: `replicates` independent draws of the coupled
/// quadruple (in parallel, deterministically), pooled spectra against the
/// exact limit measures, and each requested trace word against its exact
/// free-probability value (computed at the *realized* column ratios).
pub fn run_simulation(plan: &SimulationPlan) -> Result<SimulationReport, MatrixLabError> {
    if plan.replicates == 0 {
        return Err(MatrixLabError::NoReplicates);
    }
    let spec = BetaPairSpec::from_parameters(plan.sigma, plan.theta, plan.dimension)?;
    for w in &plan.words {
        if w.len() > MAX_WORD_LEN {
            return Err(MatrixLabError::WordTooLong(w.len()));
        }
        word_family(w)?;
    }
    let sigma_hat = spec.sigma_hat();
    let theta_hat = spec.theta_hat();
    let u_law = FreeBinomialLaw::new(sigma_hat, theta_hat)?;
    let v_law = FreePoissonLaw::new(sigma_hat + theta_hat, 1.0)?;
    let engine = {
        let mut cumulants = CumulantMap::new();
        cumulants.insert(u_law.cumulants(MAX_WORD_LEN + 4, 'U'));
        cumulants.insert(v_law.cumulants(MAX_WORD_LEN + 4, 'V'));
        FreeMomentEngine::new(cumulants)
    };
    let exact: Vec<f64> = plan
        .words
        .iter()
        .map(|w| -> Result<f64, MatrixLabError> {
            match word_family(w)? {
                WordFamily::Factor => Ok(engine.moment(w)?),
                WordFamily::Sandwich => Ok(xy_moment(w, &engine)?),
            }
        })
        .collect::<Result<_, _>>()?;

    let summaries: Vec<ReplicateSummary> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| -> Result<ReplicateSummary, MatrixLabError> {
            let rep = sample_replicate(&spec, plan.seed, r as u64)?;
            let traces = plan
                .words
                .iter()
                .map(|w| trace_mixed_moment(w, &rep))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ReplicateSummary {
                rate_eigs: hermitian_eigenvalues(&rep.v),
                factor_eigs: hermitian_eigenvalues(&rep.u),
                traces,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rate_eigenvalues = Vec::with_capacity(plan.replicates * spec.dimension);
    let mut factor_eigenvalues = Vec::with_capacity(plan.replicates * spec.dimension);
    for s in &summaries {
        rate_eigenvalues.extend_from_slice(&s.rate_eigs);
        factor_eigenvalues.extend_from_slice(&s.factor_eigs);
    }
    rate_eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    factor_eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let rate_ks = ks_statistic(&rate_eigenvalues, &v_law.measure());
    let factor_ks = ks_statistic(&factor_eigenvalues, &u_law.measure()?);

    let r = plan.replicates as f64;
    let trace_moments = plan
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let values: Vec<f64> = summaries.iter().map(|s| s.traces[i]).collect();
            let mean = values.iter().sum::<f64>() / r;
            let variance = if plan.replicates > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            let std_error = (variance / r).sqrt();
            let gap = (mean - exact[i]).abs();
            let z_score = if std_error > 1e-14 {
                gap / std_error
            } else if gap < 1e-10 {
                0.0
            } else {
                f64::INFINITY
            };
            TraceMomentEstimate {
                word: w.clone(),
                mean,
                std_error,
                exact: exact[i],
                z_score,
            }
        })
        .collect();

    Ok(SimulationReport {
        spec,
        replicates: plan.replicates,
        seed: plan.seed,
        rate_ks,
        factor_ks,
        trace_moments,
        rate_eigenvalues,
        factor_eigenvalues,
    })
}

/// Strength of the leading freeness obstruction at each dimension: the
/// centered alternating trace (1/N) Tr[(U−ū)(V−v̄)(U−ū)(V−v̄)], averaged
/// over replicates. Asymptotic freeness of the two ensembles predicts this
/// tends to zero as the dimension grows.
pub fn asymptotic_freeness_diagnostic(
    sigma: f64,
    theta: f64,
    dimensions: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, MatrixLabError> {
    if replicates == 0 {
        return Err(MatrixLabError::NoReplicates);
    }
    let mut out = Vec::with_capacity(dimensions.len());
    for &n in dimensions {
        let spec = BetaPairSpec::from_parameters(sigma, theta, n)?;
        let values: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| -> Result<f64, MatrixLabError> {
                let rep = sample_replicate(&spec, seed, r as u64)?;
                let dim = spec.dimension;
                let id = CMatrix::identity(dim, dim);
                let u_mean = rep.u.trace().re / dim as f64;
                let v_mean = rep.v.trace().re / dim as f64;
                let cu = &rep.u - &id.scale(u_mean);
                let cv = &rep.v - &id.scale(v_mean);
                let prod = &cu * &cv * &cu * &cv;
                Ok(prod.trace().re / dim as f64)
            })
            .collect::<Result<_, _>>()?;
        let mean = values.iter().sum::<f64>() / replicates as f64;
        out.push((n, mean.abs()));
    }
    Ok(out)
}

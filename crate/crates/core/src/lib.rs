//! Exact and numerical free probability for the free-Poisson / free-binomial
//! regression characterization.
//!
//! The crate is layered three deep, each layer trusting only the one below:
//!
//! 1. **Exact combinatorics and series** — [`scalar`], [`series`], and
//!    [`ncpart`] provide arbitrary-precision rationals, truncated power
//!    series with composition and reversion, non-crossing partitions, and
//!    the moment ↔ free-cumulant dictionary, including mixed moments of
//!    several variables and a memoized trace-moment engine.
//! 2. **Laws and transforms** — [`transforms`] and [`laws`] build the R-,
//!    S-, and Cauchy-transform calculus on top, together with the two law
//!    families of interest (free Poisson and free binomial), their
//!    admissibility regions, spectral measures, and quadrature cross-checks.
//! 3. **The characterization and its matrix shadow** — [`lukacs`] states and
//!    verifies both directions of the regression characterization with exact
//!    arithmetic (conditional-moment constants forward, parameter recovery
//!    inverse), and [`matrixlab`] replays the same identities on complex
//!    Wishart / matrix-beta ensembles at finite dimension, with deterministic
//!    seeding and standard-error accounting.
//!
//! Every algebraic verification in layers 1–3 can run over exact rationals;
//! `f64` enters only where measures, quadrature, or Monte Carlo genuinely
//! live on the real line.

pub mod laws;
pub mod lukacs;
pub mod matrixlab;
pub mod ncpart;
pub mod scalar;
pub mod series;
pub mod transforms;

pub use laws::{
    aw_map, bernoulli_power, fb_validate, mp_density, AskeyWilsonParams, AwImage,
    FreeBinomialLaw, FreePoissonLaw, LawError, SpectralMeasure,
};
pub use lukacs::{
    build_generating_bundle, check_regression_recurrences, compute_mixed_sequences,
    conditional_moment_check, forward_check, roundtrip_characterization, solve_inverse,
    xy_moment, xy_word_reduce, ConditionalMomentReport, FreenessCertificate, GeneratingBundle,
    IdentityResiduals, InverseSolution, LukacsError, MixedMomentTable, RecurrenceResiduals,
    RegressionConstants, RoundtripReport,
};
pub use matrixlab::{
    asymptotic_freeness_diagnostic, beta_matrix_from_parts, default_trace_words,
    hermitian_eigenvalues, hermitian_inv_sqrt, ks_statistic, replicate_rng, run_simulation,
    sample_complex_wishart, sample_replicate, trace_mixed_moment, BetaPairSpec, CMatrix,
    MatrixLabError, ReplicateMatrices, SimulationPlan, SimulationReport, TraceMomentEstimate,
    WishartSpec,
};
pub use ncpart::{
    catalan, nc_partitions, ColoredWord, CumulantMap, CumulantSequence, FreeMomentEngine,
    MomentSequence, NcError, NonCrossingPartition,
};
pub use scalar::{parse_rational, Rat, Scalar};
pub use series::{SeriesError, TruncatedSeries};
pub use transforms::{
    cauchy_from_r, cauchy_quadrature, crr_residual, free_add_convolve, free_mul_convolve,
    gauss_legendre, msr_residual, r_from_s, s_from_r, str_residual, CauchySeries, MgfSeries,
    RTransform, STransform, TransformsError,
};

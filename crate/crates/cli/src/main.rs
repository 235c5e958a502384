//! Command-line surface for the verification pipelines: law descriptions,
//! the forward freeness certificate, inverse parameter recovery, the full
//! round trip, and the random-matrix Monte Carlo.
//!
//! Every command prints one versioned JSON document to stdout (or, where the
//! result is a flat table, optionally CSV) and can additionally write the
//! same document plus its tables into an output directory given by `--out`
//! or the `FREEPROB_OUT_DIR` environment variable. Exit codes are part of
//! the contract: 0 when the computation ran and every verification passed,
//! 1 when it ran but a verification failed, 2 for invalid input.
//!
//! Algebraic commands default to exact rational arithmetic (`--mode
//! rational`), where a "pass" means residuals are identically zero, not
//! merely small; `--mode float` reruns the same pipeline in f64. The
//! simulation is float by nature and instead pins down reproducibility: an
//! explicit `--seed` is echoed back, a generated one is recorded in the
//! output.

mod records;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use freeprob::{
    conditional_moment_check, forward_check, parse_rational, roundtrip_characterization,
    run_simulation, solve_inverse, ColoredWord, FreeBinomialLaw, FreePoissonLaw, LawError,
    LukacsError, MatrixLabError, MomentSequence, NcError, Rat, RegressionConstants, Scalar,
    SimulationPlan,
};
use records::{scalar_cells, scalar_value, series_value, CsvTable, SCHEMA_VERSION};

const DENSITY_SAMPLES: usize = 101;

#[derive(Parser)]
#[command(
    name = "freeprob",
    version,
    about = "Exact and Monte Carlo verification of the free-Poisson / free-binomial regression characterization"
)]
struct Cli {
    /// Directory for output files (default: $FREEPROB_OUT_DIR; no files when unset)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe one law: moments, cumulants, region, support, atoms, density
    Law {
        #[command(subcommand)]
        family: LawFamily,
    },
    /// Certify the forward direction: the sandwich pair is free with the predicted marginals
    Forward(ForwardArgs),
    /// Recover all four parameters from the regression constants and two trace moments
    Inverse(InverseArgs),
    /// Run a parameter triple through the whole characterization and back
    Roundtrip(RoundtripArgs),
    /// Sample the Wishart / matrix-beta ensembles against their limit laws
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum LawFamily {
    /// Free-Poisson (Marchenko–Pastur) law with rate λ and jump α
    Mp(MpArgs),
    /// Free-binomial law with shape parameters σ and θ
    Fb(FbArgs),
}

/// Numeric lane: exact rationals or f64.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rational,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct MpArgs {
    /// Rate λ > 0 (integer, fraction like 5/2, or decimal)
    #[arg(long)]
    lambda: String,
    /// Jump α > 0
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Number of moments and cumulants to report
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,
    /// Stdout format; csv prints the moment table
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct FbArgs {
    /// First shape parameter σ
    #[arg(long)]
    sigma: String,
    /// Second shape parameter θ
    #[arg(long)]
    theta: String,
    /// Number of moments and cumulants to report
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,
    /// Stdout format; csv prints the moment table
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct ForwardArgs {
    /// Free-binomial shape σ of the compressed factor
    #[arg(long)]
    sigma: String,
    /// Free-binomial shape θ of the compressed factor
    #[arg(long)]
    theta: String,
    /// Jump α of the free-Poisson rate variable
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Override the rate of V (a matched pair has λ = σ + θ; overriding is a negative control)
    #[arg(long)]
    lambda: Option<String>,
    /// Sweep order: every word in the pair up to this length is checked
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,
}

#[derive(Args)]
struct InverseArgs {
    /// First regression constant c₁
    #[arg(long)]
    c1: String,
    /// Second regression constant c₂
    #[arg(long)]
    c2: String,
    /// Trace moment β₀ = φ(V); needed once (c₁, c₂) pass admissibility
    #[arg(long)]
    beta0: Option<String>,
    /// Trace moment α₁ = φ(VU); defaults to β₀ − c₁, the value consistency forces
    #[arg(long)]
    alpha1: Option<String>,
    /// Working order of the recovered transform series
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,
}

#[derive(Args)]
struct RoundtripArgs {
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    theta: String,
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Trace-table order for the constants and the recovery
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Rational)]
    mode: Mode,
}

#[derive(Args)]
struct SimulateArgs {
    /// Shape σ: the X factor gets ≈ σN columns
    #[arg(long)]
    sigma: String,
    /// Shape θ: the Y factor gets ≈ θN columns
    #[arg(long)]
    theta: String,
    /// Matrix dimension N
    #[arg(long)]
    n: usize,
    /// Number of independent replicates
    #[arg(long)]
    reps: usize,
    /// RNG seed; generated and recorded in the output when omitted
    #[arg(long)]
    seed: Option<u64>,
    /// Trace word to estimate (repeatable; letters U, V or X, Y).
    /// Default: every cyclic class of U, V words up to length 4
    #[arg(long = "word", value_name = "WORD")]
    words: Vec<String>,
    /// KS-distance bound both pooled spectra must meet for exit code 0
    #[arg(long, default_value_t = 0.05)]
    ks_bound: f64,
    /// Standard-error band every trace estimate must meet for exit code 0
    #[arg(long, default_value_t = 4.0)]
    z_band: f64,
    /// Stdout format; csv prints the estimate table
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Lukacs(#[from] LukacsError),
    #[error(transparent)]
    MatrixLab(#[from] MatrixLabError),
    #[error(transparent)]
    Word(#[from] NcError),
    #[error("could not write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("could not serialize output: {0}")]
    Json(#[from] serde_json::Error),
}

/// Verification verdict of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn main() {
    let cli = Cli::parse();
    let sink = OutputSink::resolve(cli.out.clone());
    match dispatch(cli, &sink) {
        Ok(Outcome::Pass) => {}
        Ok(Outcome::Fail) => std::process::exit(1),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(2);
        }
    }
}

fn dispatch(cli: Cli, sink: &OutputSink) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Law { family } => match family {
            LawFamily::Mp(args) => run_law_mp(args, sink),
            LawFamily::Fb(args) => run_law_fb(args, sink),
        },
        Command::Forward(args) => run_forward(args, sink),
        Command::Inverse(args) => run_inverse(args, sink),
        Command::Roundtrip(args) => run_roundtrip(args, sink),
        Command::Simulate(args) => run_simulate(args, sink),
    }
}

fn parse_rat(s: &str, flag: &str) -> Result<Rat, CliError> {
    parse_rational(s).map_err(|e| CliError::Input(format!("{flag}: {e}")))
}

fn parse_f64(s: &str, flag: &str) -> Result<f64, CliError> {
    parse_rational(s)
        .map(|r| r.to_f64())
        .map_err(|e| CliError::Input(format!("{flag}: {e}")))
}

fn require_order(k: usize) -> Result<(), CliError> {
    if k == 0 {
        Err(CliError::Input("--k must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn mode_label<T: Scalar>() -> &'static str {
    if T::EXACT {
        "rational"
    } else {
        "float"
    }
}

// ---------------------------------------------------------------------------
// law

fn run_law_mp(args: MpArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    require_order(args.k)?;
    let (doc, tables) = match args.mode {
        Mode::Rational => law_mp_doc::<Rat>(
            parse_rat(&args.lambda, "--lambda")?,
            parse_rat(&args.alpha, "--alpha")?,
            args.k,
        )?,
        Mode::Float => law_mp_doc::<f64>(
            parse_f64(&args.lambda, "--lambda")?,
            parse_f64(&args.alpha, "--alpha")?,
            args.k,
        )?,
    };
    emit(&doc, &tables, args.format, "law_mp_moments", "law_mp", sink)?;
    Ok(Outcome::Pass)
}

fn law_mp_doc<T: Scalar>(
    lambda: T,
    alpha: T,
    k: usize,
) -> Result<(Value, Vec<CsvTable>), CliError> {
    let law = FreePoissonLaw::new(lambda, alpha)?;
    let moments = law.moments(k, 'v');
    let cumulants = law.cumulants(k, 'v');
    let float = law.to_float();
    let measure = float.measure();
    let (lo, hi) = float.support();
    let density = measure.density_samples(DENSITY_SAMPLES);
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "law",
        "family": "free-poisson",
        "mode": mode_label::<T>(),
        "parameters": {
            "lambda": scalar_value(law.rate()),
            "alpha": scalar_value(law.jump()),
        },
        "truncation": k,
        "moments": moment_values(&moments),
        "cumulants": Value::Array(cumulants.values().iter().map(scalar_value).collect()),
        "support": [lo, hi],
        "atoms": atom_values(measure.atoms()),
        "density": density_values(&density),
    });
    let tables = vec![
        moment_table("law_mp_moments", &moments),
        density_table("law_mp_density", &density),
    ];
    Ok((doc, tables))
}

fn run_law_fb(args: FbArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    require_order(args.k)?;
    let (doc, tables) = match args.mode {
        Mode::Rational => law_fb_doc::<Rat>(
            parse_rat(&args.sigma, "--sigma")?,
            parse_rat(&args.theta, "--theta")?,
            args.k,
        )?,
        Mode::Float => law_fb_doc::<f64>(
            parse_f64(&args.sigma, "--sigma")?,
            parse_f64(&args.theta, "--theta")?,
            args.k,
        )?,
    };
    emit(&doc, &tables, args.format, "law_fb_moments", "law_fb", sink)?;
    Ok(Outcome::Pass)
}

fn law_fb_doc<T: Scalar>(
    sigma: T,
    theta: T,
    k: usize,
) -> Result<(Value, Vec<CsvTable>), CliError> {
    let law = FreeBinomialLaw::new(sigma, theta)?;
    let diag = law.diagnostics();
    let moments = law.moments(k, 'u');
    let cumulants = law.cumulants(k, 'u');
    // The spectral picture only exists in the density regime; outside it the
    // law is still a perfectly good moment sequence, so those fields go null
    // rather than failing the whole command.
    let (support, atoms, density) = if diag.density_regime {
        let float = law.to_float();
        let measure = float.measure()?;
        let (lo, hi) = float.support()?;
        let samples = measure.density_samples(DENSITY_SAMPLES);
        (
            json!([lo, hi]),
            atom_values(measure.atoms()),
            density_values(&samples),
        )
    } else {
        (Value::Null, Value::Null, Value::Null)
    };
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "law",
        "family": "free-binomial",
        "mode": mode_label::<T>(),
        "parameters": {
            "sigma": scalar_value(law.sigma()),
            "theta": scalar_value(law.theta()),
        },
        "region": {
            "ratio_sum": scalar_value(&diag.ratio_sum),
            "ratio_prod": scalar_value(&diag.ratio_prod),
            "admissible": diag.admissible,
            "density_regime": diag.density_regime,
        },
        "truncation": k,
        "moments": moment_values(&moments),
        "cumulants": Value::Array(cumulants.values().iter().map(scalar_value).collect()),
        "support": support,
        "atoms": atoms,
        "density": density,
    });
    let mut tables = vec![moment_table("law_fb_moments", &moments)];
    if diag.density_regime {
        let samples = law.to_float().measure()?.density_samples(DENSITY_SAMPLES);
        tables.push(density_table("law_fb_density", &samples));
    }
    Ok((doc, tables))
}

// ---------------------------------------------------------------------------
// forward

fn run_forward(args: ForwardArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    let (doc, outcome) = match args.mode {
        Mode::Rational => forward_doc::<Rat>(
            parse_rat(&args.sigma, "--sigma")?,
            parse_rat(&args.theta, "--theta")?,
            parse_rat(&args.alpha, "--alpha")?,
            args.lambda
                .as_deref()
                .map(|s| parse_rat(s, "--lambda"))
                .transpose()?,
            args.k,
        )?,
        Mode::Float => forward_doc::<f64>(
            parse_f64(&args.sigma, "--sigma")?,
            parse_f64(&args.theta, "--theta")?,
            parse_f64(&args.alpha, "--alpha")?,
            args.lambda
                .as_deref()
                .map(|s| parse_f64(s, "--lambda"))
                .transpose()?,
            args.k,
        )?,
    };
    emit(&doc, &[], OutputFormat::Json, "", "forward", sink)?;
    Ok(outcome)
}

fn forward_doc<T: Scalar>(
    sigma: T,
    theta: T,
    alpha: T,
    lambda: Option<T>,
    k: usize,
) -> Result<(Value, Outcome), CliError> {
    let u = FreeBinomialLaw::new(sigma, theta)?;
    let rate = lambda.unwrap_or_else(|| u.sigma().clone() + u.theta().clone());
    let v = FreePoissonLaw::new(rate, alpha)?;
    let certificate = forward_check(&u, &v, k)?;
    let conditional = conditional_moment_check(&u, &v, k)?;
    let pass = certificate.passed() && conditional.passed();
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "forward",
        "mode": mode_label::<T>(),
        "parameters": {
            "sigma": scalar_value(u.sigma()),
            "theta": scalar_value(u.theta()),
            "alpha": scalar_value(v.jump()),
            "lambda": scalar_value(v.rate()),
        },
        "order": k,
        "constants": {
            "c1": scalar_value(&conditional.constants.c1),
            "c2": scalar_value(&conditional.constants.c2),
        },
        "certificate": {
            "rate_matches_sum": certificate.rate_matches_sum,
            "density_regime": certificate.density_regime,
            "max_mixed_cumulant": scalar_value(&certificate.max_mixed_cumulant),
            "max_x_marginal_gap": scalar_value(&certificate.max_x_marginal_gap),
            "max_y_marginal_gap": scalar_value(&certificate.max_y_marginal_gap),
            "mixed_words_checked": certificate.mixed_words_checked,
            "passed": certificate.passed(),
        },
        "conditional": {
            "first_residuals": Value::Array(conditional.first.iter().map(scalar_value).collect()),
            "second_residuals": Value::Array(conditional.second.iter().map(scalar_value).collect()),
            "max_abs": scalar_value(&conditional.max_abs()),
            "passed": conditional.passed(),
        },
        "pass": pass,
    });
    let outcome = if pass { Outcome::Pass } else { Outcome::Fail };
    Ok((doc, outcome))
}

// ---------------------------------------------------------------------------
// inverse

fn run_inverse(args: InverseArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    require_order(args.k)?;
    let (doc, outcome) = match args.mode {
        Mode::Rational => inverse_doc::<Rat>(
            parse_rat(&args.c1, "--c1")?,
            parse_rat(&args.c2, "--c2")?,
            args.beta0
                .as_deref()
                .map(|s| parse_rat(s, "--beta0"))
                .transpose()?,
            args.alpha1
                .as_deref()
                .map(|s| parse_rat(s, "--alpha1"))
                .transpose()?,
            args.k,
        )?,
        Mode::Float => inverse_doc::<f64>(
            parse_f64(&args.c1, "--c1")?,
            parse_f64(&args.c2, "--c2")?,
            args.beta0
                .as_deref()
                .map(|s| parse_f64(s, "--beta0"))
                .transpose()?,
            args.alpha1
                .as_deref()
                .map(|s| parse_f64(s, "--alpha1"))
                .transpose()?,
            args.k,
        )?,
    };
    emit(&doc, &[], OutputFormat::Json, "", "inverse", sink)?;
    Ok(outcome)
}

fn inverse_doc<T: Scalar>(
    c1: T,
    c2: T,
    beta0: Option<T>,
    alpha1: Option<T>,
    k: usize,
) -> Result<(Value, Outcome), CliError> {
    let constants = RegressionConstants::new(c1, c2);
    // Admissibility of the constants alone is checked first, so that an
    // inconsistent (c₁, c₂) is reported even when no trace moments were given.
    constants.validate()?;
    let beta0 = beta0.ok_or_else(|| {
        CliError::Input("--beta0 is required to recover the rate parameter".into())
    })?;
    let alpha1 = alpha1.unwrap_or_else(|| beta0.clone() - constants.c1.clone());
    let solution = solve_inverse(&constants, &beta0, &alpha1, k)?;
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "inverse",
        "mode": mode_label::<T>(),
        "constants": {
            "c1": scalar_value(&constants.c1),
            "c2": scalar_value(&constants.c2),
        },
        "inputs": {
            "beta0": scalar_value(&beta0),
            "alpha1": scalar_value(&alpha1),
        },
        "order": k,
        "recovered": {
            "lambda": scalar_value(&solution.lambda),
            "alpha": scalar_value(&solution.alpha),
            "sigma": scalar_value(&solution.sigma),
            "theta": scalar_value(&solution.theta),
        },
        "transforms": {
            "rate_r": series_value(solution.rate_r.series()),
            "rate_s": series_value(solution.rate_s.series()),
            "product_s": series_value(solution.product_s.series()),
            "product_chi": series_value(&solution.product_chi),
            "factor_s": series_value(solution.factor_s.series()),
            "factor_cauchy_moments": series_value(solution.factor_cauchy.moments()),
        },
        "moment_match_gap": scalar_value(&solution.moment_match_gap),
        "certified": solution.certified(),
    });
    let outcome = if solution.certified() {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((doc, outcome))
}

// ---------------------------------------------------------------------------
// roundtrip

fn run_roundtrip(args: RoundtripArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    require_order(args.k)?;
    let (doc, outcome) = match args.mode {
        Mode::Rational => roundtrip_doc::<Rat>(
            parse_rat(&args.sigma, "--sigma")?,
            parse_rat(&args.theta, "--theta")?,
            parse_rat(&args.alpha, "--alpha")?,
            args.k,
        )?,
        Mode::Float => roundtrip_doc::<f64>(
            parse_f64(&args.sigma, "--sigma")?,
            parse_f64(&args.theta, "--theta")?,
            parse_f64(&args.alpha, "--alpha")?,
            args.k,
        )?,
    };
    emit(&doc, &[], OutputFormat::Json, "", "roundtrip", sink)?;
    Ok(outcome)
}

fn roundtrip_doc<T: Scalar>(
    sigma: T,
    theta: T,
    alpha: T,
    k: usize,
) -> Result<(Value, Outcome), CliError> {
    let report = roundtrip_characterization(sigma.clone(), theta.clone(), alpha.clone(), k)?;
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "roundtrip",
        "mode": mode_label::<T>(),
        "parameters": {
            "sigma": scalar_value(&sigma),
            "theta": scalar_value(&theta),
            "alpha": scalar_value(&alpha),
        },
        "order": k,
        "constants": {
            "c1": scalar_value(&report.constants.c1),
            "c2": scalar_value(&report.constants.c2),
        },
        "recovered": {
            "lambda": scalar_value(&report.solution.lambda),
            "alpha": scalar_value(&report.solution.alpha),
            "sigma": scalar_value(&report.solution.sigma),
            "theta": scalar_value(&report.solution.theta),
        },
        "gaps": {
            "sigma": scalar_value(&report.sigma_gap),
            "theta": scalar_value(&report.theta_gap),
            "alpha": scalar_value(&report.alpha_gap),
            "lambda": scalar_value(&report.lambda_gap),
        },
        "certificate_passed": report.certificate.passed(),
        "transform_certified": report.solution.certified(),
        "closed": report.closed(),
    });
    let outcome = if report.closed() {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((doc, outcome))
}

// ---------------------------------------------------------------------------
// simulate

fn run_simulate(args: SimulateArgs, sink: &OutputSink) -> Result<Outcome, CliError> {
    let sigma = parse_f64(&args.sigma, "--sigma")?;
    let theta = parse_f64(&args.theta, "--theta")?;
    let (seed, seed_source) = match args.seed {
        Some(s) => (s, "explicit"),
        None => (rand::random::<u64>(), "generated"),
    };
    let mut plan = SimulationPlan::new(sigma, theta, args.n, args.reps, seed);
    if !args.words.is_empty() {
        plan.words = args
            .words
            .iter()
            .map(|w| ColoredWord::parse(w))
            .collect::<Result<Vec<_>, _>>()?;
    }
    let report = run_simulation(&plan)?;
    let pass = report.within_bands(args.ks_bound, args.z_band);
    let estimates: Vec<Value> = report
        .trace_moments
        .iter()
        .map(|t| {
            json!({
                "word": t.word.to_string(),
                "mean": t.mean,
                "std_error": t.std_error,
                "exact": t.exact,
                // Non-finite z-scores (degenerate estimator) serialize as null.
                "z_score": if t.z_score.is_finite() { json!(t.z_score) } else { Value::Null },
            })
        })
        .collect();
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "command": "simulate",
        "parameters": {
            "sigma": sigma,
            "theta": theta,
            "dimension": args.n,
            "replicates": args.reps,
            "seed": seed,
            "seed_source": seed_source,
            "ks_bound": args.ks_bound,
            "z_band": args.z_band,
        },
        "realized": {
            "x_columns": report.spec.x_columns,
            "y_columns": report.spec.y_columns,
            "sigma_hat": report.spec.sigma_hat(),
            "theta_hat": report.spec.theta_hat(),
        },
        "spectra": {
            "rate_ks": report.rate_ks,
            "factor_ks": report.factor_ks,
        },
        "estimates": estimates,
        "pass": pass,
    });
    let estimate_table = CsvTable {
        name: "simulate_estimates",
        header: vec!["word", "mean", "std_error", "exact", "z_score"],
        rows: report
            .trace_moments
            .iter()
            .map(|t| {
                vec![
                    t.word.to_string(),
                    t.mean.to_string(),
                    t.std_error.to_string(),
                    t.exact.to_string(),
                    t.z_score.to_string(),
                ]
            })
            .collect(),
    };
    let tables = vec![
        estimate_table,
        eigenvalue_table("simulate_rate_spectrum", &report.rate_eigenvalues),
        eigenvalue_table("simulate_factor_spectrum", &report.factor_eigenvalues),
    ];
    emit(
        &doc,
        &tables,
        args.format,
        "simulate_estimates",
        "simulate",
        sink,
    )?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

// ---------------------------------------------------------------------------
// shared rendering and output plumbing

fn moment_values<T: Scalar>(m: &MomentSequence<T>) -> Value {
    Value::Array((1..=m.order()).map(|n| scalar_value(&m.moment(n))).collect())
}

fn atom_values(atoms: &[(f64, f64)]) -> Value {
    Value::Array(
        atoms
            .iter()
            .map(|&(position, mass)| json!({ "position": position, "mass": mass }))
            .collect(),
    )
}

fn density_values(samples: &[(f64, f64)]) -> Value {
    Value::Array(
        samples
            .iter()
            .map(|&(x, value)| json!({ "x": x, "density": value }))
            .collect(),
    )
}

fn moment_table<T: Scalar>(name: &'static str, m: &MomentSequence<T>) -> CsvTable {
    CsvTable {
        name,
        header: vec!["n", "exact", "float"],
        rows: (1..=m.order())
            .map(|n| {
                let (exact, float) = scalar_cells(&m.moment(n));
                vec![n.to_string(), exact, float]
            })
            .collect(),
    }
}

fn density_table(name: &'static str, samples: &[(f64, f64)]) -> CsvTable {
    CsvTable {
        name,
        header: vec!["x", "density"],
        rows: samples
            .iter()
            .map(|&(x, d)| vec![x.to_string(), d.to_string()])
            .collect(),
    }
}

fn eigenvalue_table(name: &'static str, eigenvalues: &[f64]) -> CsvTable {
    CsvTable {
        name,
        header: vec!["eigenvalue"],
        rows: eigenvalues.iter().map(|e| vec![e.to_string()]).collect(),
    }
}

/// Where result files go: `--out` wins, then `FREEPROB_OUT_DIR`, then
/// nowhere (stdout only).
struct OutputSink {
    dir: Option<PathBuf>,
}

impl OutputSink {
    fn resolve(flag: Option<PathBuf>) -> Self {
        let dir = flag.or_else(|| std::env::var_os("FREEPROB_OUT_DIR").map(PathBuf::from));
        Self { dir }
    }

    fn write(&self, stem: &str, doc: &Value, tables: &[CsvTable]) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let json_path = dir.join(format!("{stem}.json"));
        let mut body = serde_json::to_string_pretty(doc)?;
        body.push('\n');
        std::fs::write(&json_path, body).map_err(|source| CliError::Io {
            path: json_path.clone(),
            source,
        })?;
        for table in tables {
            let path = dir.join(format!("{}.csv", table.name));
            std::fs::write(&path, table.render()).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

fn emit(
    doc: &Value,
    tables: &[CsvTable],
    format: OutputFormat,
    primary_table: &str,
    stem: &str,
    sink: &OutputSink,
) -> Result<(), CliError> {
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(doc)?),
        OutputFormat::Csv => {
            let table = tables
                .iter()
                .find(|t| t.name == primary_table)
                .expect("every csv-capable command names a primary table");
            print!("{}", table.render());
        }
    }
    sink.write(stem, doc, tables)
}

//! End-to-end tests of the `freeprob` binary: spawn the real executable and
//! check the JSON documents, file artifacts, and exit codes it produces.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn freeprob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeprob"))
        .args(args)
        .env_remove("FREEPROB_OUT_DIR")
        .output()
        .expect("binary should spawn")
}

/// Parses stdout as JSON after asserting the run succeeded.
fn json_ok(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "expected success, got {:?}; stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

fn exact(v: &Value) -> &str {
    v["exact"].as_str().expect("an exact/float pair")
}

#[test]
fn law_mp_reports_the_classic_moment_sequence() {
    let out = freeprob(&["law", "mp", "--lambda", "2", "--alpha", "1", "--k", "8"]);
    let doc = json_ok(&out);
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["family"], "free-poisson");
    let moments: Vec<&str> = doc["moments"].as_array().unwrap().iter().map(exact).collect();
    assert_eq!(
        moments,
        ["2", "6", "22", "90", "394", "1806", "8558", "41586"]
    );
    // Constant free cumulants are the signature of a free-Poisson law.
    for kappa in doc["cumulants"].as_array().unwrap() {
        assert_eq!(exact(kappa), "2");
    }
    assert!(doc["atoms"].as_array().unwrap().is_empty());
    assert!(!doc["density"].as_array().unwrap().is_empty());
}

#[test]
fn law_mp_with_small_rate_carries_an_atom_at_zero() {
    let out = freeprob(&["law", "mp", "--lambda", "1/2", "--k", "4"]);
    let doc = json_ok(&out);
    let atoms = doc["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0]["position"], 0.0);
    assert_eq!(atoms[0]["mass"], 0.5);
}

#[test]
fn law_fb_symmetric_pair_is_the_arcsine_law() {
    let out = freeprob(&["law", "fb", "--sigma", "1", "--theta", "1", "--k", "4"]);
    let doc = json_ok(&out);
    assert_eq!(doc["family"], "free-binomial");
    assert_eq!(doc["region"]["admissible"], true);
    assert_eq!(doc["region"]["density_regime"], true);
    let moments: Vec<&str> = doc["moments"].as_array().unwrap().iter().map(exact).collect();
    assert_eq!(moments, ["1/2", "3/8", "5/16", "35/128"]);
    assert!(doc["atoms"].as_array().unwrap().is_empty());
    let support = doc["support"].as_array().unwrap();
    assert!(support[0].as_f64().unwrap().abs() < 1e-12);
    assert!((support[1].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn law_fb_atoms_appear_below_the_unit_shapes() {
    let out = freeprob(&["law", "fb", "--sigma", "1/2", "--theta", "2", "--k", "3"]);
    let doc = json_ok(&out);
    let atoms = doc["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0]["position"], 0.0);
    assert_eq!(atoms[0]["mass"], 0.5);
}

#[test]
fn law_fb_outside_the_region_exits_with_the_diagnostic() {
    let out = freeprob(&["law", "fb", "--sigma", "0.5", "--theta", "0.4"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("outside the admissible region"),
        "stderr: {stderr}"
    );
}

#[test]
fn forward_certifies_the_matched_pair() {
    let out = freeprob(&[
        "forward", "--sigma", "1", "--theta", "1", "--alpha", "1", "--k", "6",
    ]);
    let doc = json_ok(&out);
    assert_eq!(doc["pass"], true);
    assert_eq!(exact(&doc["constants"]["c1"]), "1");
    assert_eq!(exact(&doc["constants"]["c2"]), "2");
    assert_eq!(exact(&doc["certificate"]["max_mixed_cumulant"]), "0");
    assert_eq!(doc["conditional"]["passed"], true);
}

#[test]
fn forward_with_a_mismatched_rate_fails_with_exit_one() {
    let out = freeprob(&[
        "forward", "--sigma", "1", "--theta", "1", "--alpha", "1", "--lambda", "5/2", "--k", "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // The report is still written in full so the failure can be inspected.
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pass"], false);
    assert_eq!(doc["certificate"]["rate_matches_sum"], false);
    assert_ne!(exact(&doc["certificate"]["max_mixed_cumulant"]), "0");
}

#[test]
fn forward_order_bounds_are_enforced() {
    let out = freeprob(&["forward", "--sigma", "1", "--theta", "1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inverse_recovers_the_canonical_example() {
    let out = freeprob(&[
        "inverse", "--c1", "1", "--c2", "2", "--beta0", "2", "--alpha1", "1",
    ]);
    let doc = json_ok(&out);
    assert_eq!(exact(&doc["recovered"]["lambda"]), "2");
    assert_eq!(exact(&doc["recovered"]["alpha"]), "1");
    assert_eq!(exact(&doc["recovered"]["sigma"]), "1");
    assert_eq!(exact(&doc["recovered"]["theta"]), "1");
    assert_eq!(doc["certified"], true);
    let chi: Vec<&str> = doc["transforms"]["product_chi"]
        .as_array()
        .unwrap()
        .iter()
        .map(exact)
        .collect();
    assert_eq!(&chi[..4], ["0", "1", "-2", "3"]);
}

#[test]
fn inverse_without_trace_moments_reports_inadmissible_constants() {
    let out = freeprob(&["inverse", "--c1", "1", "--c2", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("variance gap"), "stderr: {stderr}");
}

#[test]
fn inverse_requires_beta0_once_constants_pass() {
    let out = freeprob(&["inverse", "--c1", "1", "--c2", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--beta0"), "stderr: {stderr}");
}

#[test]
fn roundtrip_closes_exactly_on_an_asymmetric_triple() {
    let out = freeprob(&[
        "roundtrip", "--sigma", "2", "--theta", "3", "--alpha", "0.5",
    ]);
    let doc = json_ok(&out);
    assert_eq!(doc["closed"], true);
    assert_eq!(exact(&doc["recovered"]["alpha"]), "1/2");
    assert_eq!(exact(&doc["recovered"]["lambda"]), "5");
    for gap in ["sigma", "theta", "alpha", "lambda"] {
        assert_eq!(exact(&doc["gaps"][gap]), "0", "gap {gap}");
    }
}

#[test]
fn float_mode_switches_the_number_representation() {
    let out = freeprob(&[
        "law", "mp", "--lambda", "2", "--k", "3", "--mode", "float",
    ]);
    let doc = json_ok(&out);
    assert_eq!(doc["mode"], "float");
    // Plain numbers, not exact/float pairs.
    assert_eq!(doc["moments"][0], 2.0);
    assert_eq!(doc["moments"][2], 22.0);
}

#[test]
fn simulate_is_deterministic_given_a_seed() {
    let args = [
        "simulate", "--sigma", "1", "--theta", "1", "--n", "40", "--reps", "4", "--seed", "9",
        "--ks-bound", "1", "--z-band", "1e6",
    ];
    let first = freeprob(&args);
    let second = freeprob(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let doc = json_ok(&first);
    assert_eq!(doc["parameters"]["seed_source"], "explicit");
    assert_eq!(doc["realized"]["x_columns"], 40);
    assert_eq!(doc["estimates"].as_array().unwrap().len(), 15);
}

#[test]
fn simulate_estimates_a_requested_word() {
    let out = freeprob(&[
        "simulate", "--sigma", "1", "--theta", "1", "--n", "60", "--reps", "6", "--seed", "11",
        "--word", "UVUV", "--word", "X", "--ks-bound", "1", "--z-band", "1e6",
    ]);
    let doc = json_ok(&out);
    let estimates = doc["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 2);
    assert_eq!(estimates[0]["word"], "U V U V");
    assert_eq!(estimates[0]["exact"], 2.0);
    assert_eq!(estimates[1]["word"], "X");
    assert_eq!(estimates[1]["exact"], 1.0);
}

#[test]
fn simulate_rejects_a_thin_ensemble() {
    let out = freeprob(&[
        "simulate", "--sigma", "0.02", "--theta", "0.02", "--n", "10", "--reps", "2", "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("singular"), "stderr: {stderr}");
}

#[test]
fn simulate_records_a_generated_seed() {
    let out = freeprob(&[
        "simulate", "--sigma", "1", "--theta", "1", "--n", "24", "--reps", "2", "--ks-bound",
        "1", "--z-band", "1e6",
    ]);
    let doc = json_ok(&out);
    assert_eq!(doc["parameters"]["seed_source"], "generated");
    assert!(doc["parameters"]["seed"].is_u64());
}

#[test]
fn out_flag_writes_the_file_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = freeprob(&[
        "law", "mp", "--lambda", "2", "--k", "8", "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout_doc = json_ok(&out);
    let file_doc: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("law_mp.json")).unwrap())
            .unwrap();
    assert_eq!(stdout_doc, file_doc);
    let moments = std::fs::read_to_string(dir.path().join("law_mp_moments.csv")).unwrap();
    let mut lines = moments.lines();
    assert_eq!(lines.next(), Some("n,exact,float"));
    assert_eq!(lines.count(), 8);
    assert!(dir.path().join("law_mp_density.csv").exists());
}

#[test]
fn env_var_supplies_the_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_freeprob"))
        .args(["law", "fb", "--sigma", "1", "--theta", "1", "--k", "4"])
        .env("FREEPROB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("law_fb.json").exists());
    assert!(dir.path().join("law_fb_moments.csv").exists());
    assert!(dir.path().join("law_fb_density.csv").exists());
}

#[test]
fn simulate_writes_spectrum_dumps_to_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = freeprob(&[
        "simulate", "--sigma", "1", "--theta", "1", "--n", "24", "--reps", "3", "--seed", "2",
        "--ks-bound", "1", "--z-band", "1e6", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let spectrum =
        std::fs::read_to_string(dir.path().join("simulate_rate_spectrum.csv")).unwrap();
    // Header plus one pooled eigenvalue per (replicate, dimension) pair.
    assert_eq!(spectrum.lines().count(), 1 + 3 * 24);
    assert!(Path::new(&dir.path().join("simulate_factor_spectrum.csv")).exists());
    assert!(Path::new(&dir.path().join("simulate_estimates.csv")).exists());
}

#[test]
fn csv_format_prints_the_flat_moment_table() {
    let out = freeprob(&[
        "law", "mp", "--lambda", "2", "--k", "4", "--format", "csv",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "n,exact,float");
    assert_eq!(lines[1], "1,2,2");
    assert_eq!(lines[3], "3,22,22");
    assert_eq!(lines.len(), 5);
}

#[test]
fn invalid_rational_input_is_rejected() {
    let out = freeprob(&["law", "mp", "--lambda", "abc"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--lambda"), "stderr: {stderr}");
}

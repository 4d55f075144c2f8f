use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quadtruth::cli::config::parse_config;
use quadtruth::cli::run_mc;
use quadtruth::mc_engine::{MCConfig, SUMMARY_CSV_HEADER};
use quadtruth::scenarios::{ConfoundingScenario, Scenario, TRUTH_CSV_HEADER};
use quadtruth::grids::Decomposition;
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadtruth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

/// Weight column of an index,node,weight table.
fn weights(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

fn estimate(truth: &Value, name: &str) -> f64 {
    truth["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == name)
        .and_then(|e| e["value"].as_f64())
        .unwrap_or_else(|| panic!("no estimate {name}"))
}

#[test]
fn rule_weights() {
    let o = bin(&["rule", "--kind", "hermite", "--k", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("index,node,weight\n"));
    let w = weights(&text);
    assert_eq!(w.len(), 12);
    assert!((w.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs() < 1e-13);

    let o = bin(&["rule", "--kind", "hermite", "--k", "9", "--normal", "2", "0.5"]);
    assert!((weights(&stdout(&o)).iter().sum::<f64>() - 1.0).abs() < 1e-14);

    let o = bin(&["rule", "--kind", "genlaguerre", "--k", "5", "--alpha", "-2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha must exceed"), "{}", stderr(&o));
}

#[test]
fn rule_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("legendre.csv");
    let o = bin(&["rule", "--kind", "legendre", "--k", "6", "--uniform", "-1", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let w = weights(&std::fs::read_to_string(out).unwrap());
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}

#[test]
fn grid_rows_per_decomposition() {
    let o = bin(&["grid", "--k", "5", "--dim", "2", "--rho", "0.5", "--decomposition", "all"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("decomposition,index,x1,x2,weight"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 75);
    for name in ["none", "cholesky", "spectral"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{name},"))).count(), 25, "{name}");
    }
}

#[test]
fn exponential_truth_matches_closed_form() {
    let cfg = configs().join("exponential_confounders.json");
    let o = bin(&["truth", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let truth: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((estimate(&truth, "p0") - 2.0 / 3.0).abs() < 1e-9);

    let o = bin(&["truth", "--config", cfg.to_str().unwrap(), "--closed-form"]);
    let exact: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(estimate(&exact, "p0"), 2.0 / 3.0);
}

#[test]
fn normal_truth_is_bit_identical_to_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("normal_confounder.json");
    let o = bin(&["truth", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let truth: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lib = ConfoundingScenario::normal_example()
        .odds_ratio_truth(20, Decomposition::Spectral)
        .unwrap();
    assert_eq!(estimate(&truth, "odds_ratio").to_bits(), lib.get("odds_ratio").unwrap().to_bits());

    let csv = std::fs::read_to_string(dir.path().join("normal_confounder_truth.csv")).unwrap();
    assert!(csv.starts_with(TRUTH_CSV_HEADER));
    assert!(dir.path().join("normal_confounder_truth.json").exists());
}

#[test]
fn rmst_without_mediator_effect_has_zero_nie() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rmst.json",
        r#"{"schema_version": 1, "id": "rmst_null",
            "scenario": {"kind": "rmst", "mu0": 0.0, "mu1": -1.0, "beta0": -1.0,
                         "beta_a": -0.5, "beta_m": 0.0, "tau": 3.0}}"#,
    );
    let o = bin(&["truth", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let truth: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(estimate(&truth, "nie"), 0.0);
    assert!((estimate(&truth, "te") - estimate(&truth, "nde")).abs() == 0.0);
}

#[test]
fn mc_requires_a_seed() {
    let cfg = configs().join("rmst_mediation.json");
    let o = bin(&["mc", "--config", cfg.to_str().unwrap(), "--n", "100", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn null_treatment_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "null.json",
        r#"{"schema_version": 1, "id": "null_or",
            "scenario": {"kind": "confounding", "beta0": 0.5, "beta1": 0.0, "beta2": [-1.0],
                         "confounders": [{"type": "normal", "mu": 0.0, "sigma2": 1.0}]},
            "method": {"mc": {"n_samples": 2000, "n_reps": 4, "seed": 7, "potential_outcomes": true}}}"#,
    );
    let o = bin(&["compare", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let or_rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[1] == "odds_ratio")
        .collect();
    assert_eq!(or_rows.len(), 2, "{text}");
    for f in or_rows {
        let truth: f64 = f[4].parse().unwrap();
        let mc: f64 = f[8].parse().unwrap();
        assert!((truth - 1.0).abs() < 1e-13);
        assert!((mc - 1.0).abs() < 0.15, "{} gives {mc}", f[5]);
    }
    for name in ["mc_reps", "mc_summary", "comparison", "truth"] {
        assert!(dir.path().join(format!("null_or_{name}.csv")).exists(), "{name}");
    }
}

#[test]
fn rmst_compare_rows() {
    let cfg = configs().join("rmst_mediation.json");
    let o = bin(&["compare", "--config", cfg.to_str().unwrap(), "--seed", "3", "--n", "5000", "--reps", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for name in ["te", "nde", "nie"] {
        assert!(text.lines().any(|l| l.split(',').nth(1) == Some(name)), "{name} missing in\n{text}");
    }
}

#[test]
fn cli_mc_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = configs().join("cde_logit.json");
    let o = bin(&["--jobs", "1", "mc", "--config", path.to_str().unwrap(), "--seed", "11", "--n", "3000", "--reps", "3",
                  "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let lib = run_mc(&cfg, &MCConfig::new(3000, 3, 11).unwrap(), false).unwrap();
    let text = std::fs::read_to_string(dir.path().join("cde_logit_mc_summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SUMMARY_CSV_HEADER));
    let header: Vec<&str> = SUMMARY_CSV_HEADER.split(',').collect();
    let col = header.iter().position(|h| *h == "mean").unwrap();
    let means: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(means.len(), lib.len());
    for (m, s) in means.iter().zip(&lib) {
        assert_eq!(m.to_bits(), s.mean.to_bits(), "{}", s.estimand);
    }
}

#[test]
fn tiny_bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "bench", "--seed", "5", "--levels", "2,4", "--dims", "1..2", "--dim-level", "3",
        "--mc-samples", "1000", "--mc-reps", "3", "--timing-reps", "1", "--mc-timing-reps", "1",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let conv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.starts_with(quadtruth::bench::CONVERGENCE_CSV_HEADER));
    assert!(conv.lines().count() > 2);
    let dims = std::fs::read_to_string(dir.path().join("dimension.csv")).unwrap();
    assert!(dims.starts_with(quadtruth::bench::DIMENSION_CSV_HEADER));
}

#[test]
fn config_errors_have_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "id": "x", "scenario": {"kind": "rmst", "tua": 3.0}}"#,
    );
    let o = bin(&["truth", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));
    assert!(stderr(&o).contains("tua"), "{}", stderr(&o));

    // expit underflows to exactly 0 in both arms
    let degenerate = write(
        dir.path(),
        "degenerate.json",
        r#"{"schema_version": 1, "id": "d",
            "scenario": {"kind": "confounding", "beta0": -800.0, "beta1": 0.0, "beta2": [0.0],
                         "confounders": [{"type": "normal", "mu": 0.0, "sigma2": 1.0}]}}"#,
    );
    let o = bin(&["truth", "--config", &degenerate]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = bin(&["truth", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn scenario_round_trips_through_config() {
    let cfg = parse_config(&std::fs::read_to_string(configs().join("normal_confounder.json")).unwrap()).unwrap();
    match &cfg.scenario {
        Scenario::Confounding(s) => assert_eq!(s, &ConfoundingScenario::normal_example()),
        other => panic!("unexpected {}", other.kind()),
    }
}

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn momentmp(args: &[&str], config: Option<&str>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_momentmp"));
    cmd.args(args).arg("--out-dir").arg(out);
    let dir = TempDir::new().unwrap();
    if let Some(json) = config {
        let path = dir.path().join("config.json");
        std::fs::write(&path, json).unwrap();
        cmd.arg("--config").arg(&path);
    }
    cmd.output().unwrap()
}

/// Data rows of a CSV (comment lines and header dropped), split on commas.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let body = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, body)
}

fn note(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
        .unwrap_or_else(|| panic!("no note {key}"))
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

const SKEW7: &str = r#"{"seed": 8, "replicates": 10, "n": 7,
    "dgp": {"kind": "skew_normal", "xi": 1, "omega": 5, "alpha": 1}, "quantiles": [0.5, 0.95]}"#;

#[test]
fn bootstrap_writes_one_row_per_replicate() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"seed": 1, "replicates": 10, "n": 30, "method": "bb",
        "dgp": {"kind": "normal", "mean": 1, "variance": 25}}"#;
    let out = momentmp(&["simulate"], Some(cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let posterior = tmp.path().join("posterior.csv");
    let (header, body) = rows(&posterior);
    assert_eq!(body.len(), 10);
    assert_eq!(header[..3], ["replicate", "mean", "variance"]);
    let first = std::fs::read_to_string(&posterior).unwrap();
    assert!(first.starts_with("# config_sha256="));
    assert!(first.lines().next().unwrap().ends_with(" seed=1"));
    assert!(tmp.path().join("metadata.json").exists());
}

#[test]
fn small_sample_reports_requested_quantiles() {
    let tmp = TempDir::new().unwrap();
    let out = momentmp(&["simulate"], Some(SKEW7), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, body) = rows(&tmp.path().join("posterior.csv"));
    assert!(header.contains(&"q0.5".to_string()) && header.contains(&"q0.95".to_string()));
    let (data_header, data) = rows(&tmp.path().join("data.csv"));
    assert_eq!(data_header, ["index", "y"]);
    assert_eq!(data.len(), 7);
    let q5 = header.iter().position(|h| h == "q0.5").unwrap();
    let q95 = header.iter().position(|h| h == "q0.95").unwrap();
    for r in &body {
        assert!(r[q5].parse::<f64>().unwrap() < r[q95].parse::<f64>().unwrap());
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = r#"{"seed": 4, "replicates": 20, "n": 40, "path_stride": 100,
        "dgp": {"kind": "normal", "mean": 0, "variance": 4}, "selection": {"kfold": 5}}"#;
    assert!(momentmp(&["simulate"], Some(cfg), a.path()).status.success());
    assert!(momentmp(&["simulate"], Some(cfg), b.path()).status.success());
    for f in ["data.csv", "posterior.csv", "paths.csv", "metadata.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let c = TempDir::new().unwrap();
    assert!(momentmp(&["simulate", "--seed", "5"], Some(cfg), c.path()).status.success());
    assert_ne!(
        std::fs::read(a.path().join("posterior.csv")).unwrap(),
        std::fs::read(c.path().join("posterior.csv")).unwrap()
    );
}

#[test]
fn flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let out = momentmp(&["simulate", "--replicates", "3", "--seed", "9"], Some(SKEW7), tmp.path());
    assert!(out.status.success());
    let (_, body) = rows(&tmp.path().join("posterior.csv"));
    assert_eq!(body.len(), 3);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 9);
    assert_eq!(meta["config"]["replicates"], 3);
}

#[test]
fn curve_argmax_matches_selected_c() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"seed": 11, "n": 60, "dgp": {"kind": "normal", "mean": 1, "variance": 25}}"#;
    let out = momentmp(&["select-c"], Some(cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = tmp.path().join("curve.csv");
    let (header, body) = rows(&curve);
    assert_eq!(header, ["c", "lambda", "score"]);
    let best = body
        .iter()
        .max_by(|a, b| a[2].parse::<f64>().unwrap().total_cmp(&b[2].parse::<f64>().unwrap()))
        .unwrap();
    let c_hat = note(&curve, "c_hat");
    let lambda_hat: f64 = note(&curve, "lambda_hat").parse().unwrap();
    if c_hat == "inf" {
        assert_eq!(best[0], "inf");
    } else {
        // the curve is concave in lambda, so its best grid point brackets lambda_hat
        let lambdas: Vec<f64> = body.iter().map(|r| r[1].parse().unwrap()).collect();
        let k = body.iter().position(|r| r == best).unwrap();
        let lo = if k == 0 { 0.0 } else { lambdas[k - 1] };
        let hi = lambdas.get(k + 1).copied().unwrap_or(1.0);
        assert!(lo <= lambda_hat && lambda_hat <= hi, "{lambda_hat} outside [{lo}, {hi}]");
    }
}

#[test]
fn several_datasets_tabulate_selections() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"seed": 100, "n": 30, "datasets": 6, "dgp": {"kind": "normal", "mean": 1, "variance": 25}}"#;
    let out = momentmp(&["select-c"], Some(cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = tmp.path().join("selections.csv");
    let (_, body) = rows(&path);
    assert_eq!(body.len(), 6);
    let infinite = body.iter().filter(|r| r[4] == "true").count();
    let fraction: f64 = note(&path, "fraction_infinite").parse().unwrap();
    assert_eq!(fraction, infinite as f64 / 6.0);
}

#[test]
fn degenerate_data_fails_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("flat.csv");
    std::fs::write(&csv, "y\n2\n2\n2\n2\n2\n").unwrap();
    let cfg = format!(r#"{{"csv": {csv:?}, "column": "y", "c": "10", "replicates": 5}}"#);
    let out = momentmp(&["simulate"], Some(&cfg), &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "numerical");
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = momentmp(&["simulate"], Some(r#"{"seed": 1, "replicate": 5}"#), tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
    let out = momentmp(&["simulate", "--c", "-3"], Some(SKEW7), tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

fn logistic_csv(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn logistic_data_errors_are_distinct() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("nonbinary.csv", "y,a\n0,1\n1,2\n2,3\n0,4\n", r#"["a"]"#, "not binary"),
        ("collinear.csv", "y,a,b\n0,1,2\n1,2,4\n0,3,6\n1,4,8\n", r#"["a", "b"]"#, "rank deficient"),
        ("separated.csv", "y,a\n0,1\n0,2\n0,3\n1,4\n1,5\n1,6\n", r#"["a"]"#, "separation"),
    ];
    let mut messages = Vec::new();
    for (name, text, features, expect) in cases {
        let path = logistic_csv(tmp.path(), name, text);
        let cfg = format!(
            r#"{{"csv": {path:?}, "target": "y", "features": {features}, "train_fraction": 1.0, "c": "10", "replicates": 5}}"#
        );
        let out = momentmp(&["logistic"], Some(&cfg), &tmp.path().join("out"));
        assert_eq!(out.status.code(), Some(4), "{name}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], "data");
        let msg = err["message"].as_str().unwrap().to_string();
        assert!(msg.contains(expect), "{name}: {msg}");
        messages.push(msg);
    }
    messages.dedup();
    assert_eq!(messages.len(), 3);
}

const SYNTHETIC: &str = r#""synthetic": {"n": 240, "coefficients": [-0.4, 0.9, -0.6]}"#;

#[test]
fn logistic_zero_concentration_scores_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(r#"{{"seed": 2, "replicates": 20, {SYNTHETIC}, "c": "0", "splits": 2, "track": [0, 3]}}"#);
    let out = momentmp(&["logistic"], Some(&cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, body) = rows(&tmp.path().join("holdout_scores.csv"));
    assert_eq!(header[2], "mixture");
    for r in &body {
        assert_eq!(r[1], "0");
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }
    let (header, betas) = rows(&tmp.path().join("beta_posterior.csv"));
    assert_eq!(header, ["replicate", "intercept", "x1", "x2"]);
    assert_eq!(betas.len(), 20);
    let (header, means) = rows(&tmp.path().join("conditional_means.csv"));
    assert_eq!(header, ["replicate", "obs0", "obs3"]);
    for r in &means {
        for v in &r[1..] {
            assert!((0.0..=1.0).contains(&v.parse::<f64>().unwrap()));
        }
    }
    assert!(!tmp.path().join("score_curve.csv").exists());
}

#[test]
fn logistic_selection_curve_and_divergence() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"seed": 5, "replicates": 8, {SYNTHETIC}, "divergence": "exact_driven", "horizon": 720, "path_stride": 100}}"#
    );
    let out = momentmp(&["logistic"], Some(&cfg), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = tmp.path().join("score_curve.csv");
    let (_, body) = rows(&curve);
    assert_eq!(body[0][0], "0");
    assert_eq!(body[0][1].parse::<f64>().unwrap(), 0.0);
    let best = body
        .iter()
        .max_by(|a, b| a[1].parse::<f64>().unwrap().total_cmp(&b[1].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(best[0], note(&curve, "c_hat"));
    let (_, div) = rows(&tmp.path().join("divergence.csv"));
    assert_eq!(div.len(), 720 - 120 + 1);
    let (header, path) = rows(&tmp.path().join("glm_paths.csv"));
    assert_eq!(header[..2], ["replicate", "step"]);
    assert!(!path.is_empty());
}

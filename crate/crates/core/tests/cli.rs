use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn corrcox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrcox"))
        .args(args)
        .env_remove("CORRCOX_THREADS")
        .output()
        .unwrap()
}

fn run_path(cmd: &str, spec: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, spec.to_str().unwrap()];
    args.extend_from_slice(extra);
    corrcox(&args)
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_spec(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const TWO_INDEPENDENT: &str = r#"{
  "model_type": "factor",
  "components": 3,
  "factors": [
    { "type": "compound_poisson", "intensity": 1.0, "jumps": { "law": "exponential", "rate": 1.0 } },
    { "type": "compound_poisson", "intensity": 2.0, "jumps": { "law": "constant", "size": 0.5 } },
    { "type": "gamma", "shape": 1.0, "rate": 2.0 }
  ],
  "loadings": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
}"#;

#[test]
fn survival_reports_both_formulas() {
    let o = run_path(
        "survival",
        &bundled("shared_driver_cp.json"),
        &["--horizons", "1,2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let s = v["joint_survival"].as_f64().unwrap();
    assert!((s - (-2.5f64).exp()).abs() < 1e-12);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn survival_at_time_zero_is_one() {
    let o = run_path(
        "survival",
        &bundled("shared_driver_cp.json"),
        &["--horizons", "0,0"],
    );
    assert_eq!(json(&o)["joint_survival"].as_f64(), Some(1.0));
}

#[test]
fn horizon_count_mismatch_is_an_argument_error() {
    let o = run_path(
        "survival",
        &bundled("shared_driver_cp.json"),
        &["--horizons", "1"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected_unless_lenient() {
    let dir = TempDir::new().unwrap();
    let body = TWO_INDEPENDENT.replace(
        r#""components": 3,"#,
        r#""components": 3, "colour": "red","#,
    );
    let p = write_spec(&dir, "extra.json", &body);
    let strict = run_path("survival", &p, &["--horizons", "1,1,1"]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(stderr(&strict).contains("colour"), "{}", stderr(&strict));
    let lenient = run_path("survival", &p, &["--horizons", "1,1,1", "--lenient"]);
    assert_eq!(lenient.status.code(), Some(0), "{}", stderr(&lenient));
    assert!(stderr(&lenient).contains("colour"));
}

#[test]
fn malformed_values_are_model_errors() {
    let dir = TempDir::new().unwrap();
    for (name, body) in [
        ("syntax.json", "{ not json"),
        (
            "negative.json",
            &TWO_INDEPENDENT.replace(r#""intensity": 2.0"#, r#""intensity": -2.0"#),
        ),
        (
            "zero_row.json",
            &TWO_INDEPENDENT.replace("[0, 0, 1]", "[0, 0, 0]"),
        ),
    ] {
        let p = write_spec(&dir, name, body);
        let o = run_path("survival", &p, &["--horizons", "1,1,1"]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn too_many_components_is_a_capacity_error() {
    let dir = TempDir::new().unwrap();
    let n = 21;
    let rows: Vec<String> = (0..n).map(|_| "[1.0]".to_string()).collect();
    let body = format!(
        r#"{{"model_type": "factor", "components": {n},
            "factors": [{{"type": "compound_poisson", "intensity": 1.0, "jumps": {{"law": "exponential", "rate": 1.0}}}}],
            "loadings": [{}]}}"#,
        rows.join(",")
    );
    let p = write_spec(&dir, "big.json", &body);
    let o = run_path("mo-rates", &p, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn mo_rates_of_independent_components() {
    let dir = TempDir::new().unwrap();
    let p = write_spec(&dir, "indep.json", TWO_INDEPENDENT);
    let o = run_path("mo-rates", &p, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let rates = v["rates"].as_object().unwrap();
    for (label, r) in rates {
        let r = r.as_f64().unwrap();
        if label.contains(',') {
            assert!(r.abs() < 1e-15, "{label} = {r}");
        } else {
            assert!(r > 0.0);
        }
    }
    let golden = json(&run_path(
        "mo-rates",
        &bundled("shared_driver_cp.json"),
        &[],
    ));
    for label in ["[1]", "[2]", "[1,2]"] {
        assert!((golden["rates"][label].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn mo_rates_need_identity_deformation() {
    let dir = TempDir::new().unwrap();
    let body = TWO_INDEPENDENT.replace(
        r#""loadings""#,
        r#""deformation": { "kind": "power", "exponent": 2.0, "scale": 1.0 }, "loadings""#,
    );
    let p = write_spec(&dir, "power.json", &body);
    let o = run_path("mo-rates", &p, &[]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn simulate_rejects_too_few_paths() {
    let o = run_path(
        "simulate",
        &bundled("shared_driver_cp.json"),
        &["--paths", "10"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("paths"));
}

#[test]
fn simulate_with_short_horizon_fails_the_tail_check() {
    let o = run_path(
        "simulate",
        &bundled("shared_driver_cp.json"),
        &["--paths", "2000", "--horizons", "1,2", "--horizon", "0.5"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("--horizon"));
}

#[test]
fn simulate_reports_estimates_with_errors() {
    let o = run_path(
        "simulate",
        &bundled("shared_driver_cp.json"),
        &["--paths", "20000", "--seed", "3", "--horizons", "1,2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let js = &v["joint_survival"];
    let want = js["analytic"].as_f64().unwrap();
    for est in ["rao_blackwell", "indicator"] {
        let e = &js[est];
        let (value, se) = (e["value"].as_f64().unwrap(), e["stderr"].as_f64().unwrap());
        assert!(
            (value - want).abs() <= 4.0 * se,
            "{est}: {value} +/- {se} vs {want}"
        );
    }
    assert!(v["simultaneous_default"].is_object());
}

#[test]
fn csv_output_matches_json() {
    let spec = bundled("three_factor_linear.json");
    let j = json(&run_path("survival", &spec, &["--horizons", "0.5,1,1"]));
    let c = run_path(
        "survival",
        &spec,
        &["--horizons", "0.5,1,1", "--format", "csv"],
    );
    assert_eq!(c.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(&c.stdout[..]);
    let mut seen = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        if rec[0] == *"joint_survival" {
            let v: f64 = rec[1].parse().unwrap();
            assert_eq!(v, j["joint_survival"].as_f64().unwrap());
            seen += 1;
        }
        if rec[0] == *"horizons.0" {
            assert_eq!(&rec[1], "0.5");
            seen += 1;
        }
    }
    assert_eq!(seen, 2);
}

#[test]
fn shotnoise_reports_compensators() {
    let o = run_path(
        "shotnoise",
        &bundled("nhpp_shot_noise.json"),
        &["--horizons", "1,2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!json(&o).as_object().unwrap().is_empty());
    let wrong = run_path(
        "shotnoise",
        &bundled("shared_driver_cp.json"),
        &["--horizons", "1,2"],
    );
    assert_eq!(wrong.status.code(), Some(5));
}

#[test]
fn validate_passes_on_the_shared_driver_and_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let o = run_path(
        "validate",
        &bundled("shared_driver_cp.json"),
        &["--paths", "20000", "--out", out.to_str().unwrap()],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
    let mut printed = json(&o);
    printed["wall_clock_seconds"] = report["wall_clock_seconds"].clone();
    assert_eq!(report, printed);
    assert!(!report["checks"].as_array().unwrap().is_empty());
}

#[test]
fn validate_flags_a_table_with_negative_rates() {
    let dir = TempDir::new().unwrap();
    // lambda^{12} below lambda^1 gives gamma^2 < 0
    let p = write_spec(
        &dir,
        "table.json",
        r#"{ "model_type": "compensator_table", "components": 2,
             "rates": { "[1]": 1.0, "[2]": 0.5, "[1,2]": 0.9 } }"#,
    );
    let o = run_path("validate", &p, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["passed"], Value::Bool(false));
    assert!(!v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn every_bundled_model_validates() {
    for entry in std::fs::read_dir(bundled("")).unwrap() {
        let p = entry.unwrap().path();
        let o = run_path("validate", &p, &["--paths", "20000"]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            p.display(),
            String::from_utf8_lossy(&o.stdout)
        );
    }
}

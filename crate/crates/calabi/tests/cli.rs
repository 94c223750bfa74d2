//! CLI behavior: exit codes, deterministic reports, and the failure path.
//! The command logic is exercised in-process through `cli::run`.

use calabi::cli;

fn write_spec(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const TWO_POINTS: &str = r#"{
    "schema": 1,
    "factors": [
        {"kind": "point", "c": 1.0},
        {"kind": "point", "c": 1.0}
    ]
}"#;

const POINT_FLAT: &str = r#"{
    "schema": 1,
    "factors": [
        {"kind": "point", "c": 1.0},
        {"kind": "flat", "n0": 2, "C0": 1.0, "c": 1.5}
    ]
}"#;

fn run(args: &[&str]) -> i32 {
    cli::run(args.iter().map(|s| s.to_string()))
}

#[test]
fn verify_two_points_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "twopoints.json", TWO_POINTS);
    let out = dir.path().join("report.json");
    let code = run(&[
        "calabi",
        "verify",
        "--spec",
        spec.to_str().unwrap(),
        "--samples",
        "10",
        "--tol",
        "1e-8",
        "--seed",
        "42",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, cli::EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert_eq!(report["seed"], serde_json::json!(42));
    assert_eq!(report["samples"], serde_json::json!(10));
}

#[test]
fn compose_reports_f_sequence_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "twopoints.json", TWO_POINTS);
    let out = dir.path().join("compose.json");
    let code = run(&[
        "calabi",
        "compose",
        "--spec",
        spec.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, cli::EXIT_OK);
    let data: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(data["dim"], serde_json::json!(1));
    assert_eq!(data["ambient_dim"], serde_json::json!(2));
    assert_eq!(data["f_sequence"], serde_json::json!([1, 2]));
    // C = 2^{-1/3}, L1 = -2^{-2/3} for two unit points
    let c = data["C"].as_f64().unwrap();
    let l1 = data["L1"].as_f64().unwrap();
    assert!((c - 2.0f64.powf(-1.0 / 3.0)).abs() < 1e-14);
    assert!((l1 + 2.0f64.powf(-2.0 / 3.0)).abs() < 1e-14);
}

#[test]
fn missing_spec_exits_three() {
    let code = run(&["calabi", "verify", "--spec", "/nonexistent/missing.json"]);
    assert_eq!(code, cli::EXIT_BAD_SPEC);
}

#[test]
fn invalid_spec_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_spec(&dir, "bad.json", r#"{"schema": 1, "factors": "nope"}"#);
    assert_eq!(run(&["calabi", "verify", "--spec", bad.to_str().unwrap()]), cli::EXIT_BAD_SPEC);

    let unknown = write_spec(
        &dir,
        "unknown.json",
        r#"{"schema": 1, "factors": [{"kind": "point", "weird": 1}, {"kind": "point"}]}"#,
    );
    assert_eq!(
        run(&["calabi", "compose", "--spec", unknown.to_str().unwrap()]),
        cli::EXIT_BAD_SPEC
    );

    let wrong_schema = write_spec(
        &dir,
        "schema.json",
        r#"{"schema": 7, "factors": [{"kind": "point"}, {"kind": "point"}]}"#,
    );
    assert_eq!(
        run(&["calabi", "compose", "--spec", wrong_schema.to_str().unwrap()]),
        cli::EXIT_BAD_SPEC
    );
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(run(&["calabi", "no-such-command"]), cli::EXIT_BAD_ARGS);
    assert_eq!(run(&["calabi", "verify"]), cli::EXIT_BAD_ARGS); // --spec is required
}

#[test]
fn unattainable_tolerance_exits_one_and_report_says_failed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "pf.json", POINT_FLAT);
    let out = dir.path().join("report.json");
    let code = run(&[
        "calabi",
        "verify",
        "--spec",
        spec.to_str().unwrap(),
        "--samples",
        "3",
        "--tol",
        "1e-30",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, cli::EXIT_FAILED_CHECKS);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(false));
}

#[test]
fn reports_are_byte_identical_for_identical_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "pf.json", POINT_FLAT);
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    for out in [&out1, &out2] {
        let code = run(&[
            "calabi",
            "verify",
            "--spec",
            spec.to_str().unwrap(),
            "--samples",
            "4",
            "--seed",
            "7",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, cli::EXIT_OK);
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn invariants_and_laws_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "pf.json", POINT_FLAT);
    let inv_out = dir.path().join("inv.json");
    assert_eq!(
        run(&[
            "calabi",
            "invariants",
            "--spec",
            spec.to_str().unwrap(),
            "--samples",
            "3",
            "--output",
            inv_out.to_str().unwrap(),
        ]),
        cli::EXIT_OK
    );
    let data: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&inv_out).unwrap()).unwrap();
    assert_eq!(data["points"].as_array().unwrap().len(), 3);
    // every sampled L1 should be the same negative constant
    let l1 = data["points"][0]["l1"].as_f64().unwrap();
    assert!(l1 < 0.0);

    let laws_out = dir.path().join("laws.csv");
    assert_eq!(
        run(&[
            "calabi",
            "laws",
            "--spec",
            spec.to_str().unwrap(),
            "--format",
            "csv",
            "--output",
            laws_out.to_str().unwrap(),
        ]),
        cli::EXIT_OK
    );
    let csv = std::fs::read_to_string(&laws_out).unwrap();
    assert!(csv.starts_with("name,"));
    assert!(csv.contains("commutativity/pointwise"));
    assert!(csv.contains("associativity/pointwise"));
    assert!(csv.contains("equivalence/xtilde_determinant"));
}

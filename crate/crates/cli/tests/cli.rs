//! End-to-end tests of the `mfe` binary: command behavior, artifact
//! formats, the exit-code map, and run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

use mfe_torus::{TorusField, TorusGrid};

fn mfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = mfe(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn run_code(args: &[&str]) -> (i32, String) {
    let out = mfe(args);
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Parse a CSV body (header + rows) into cells.
fn csv_cells(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .expect("non-empty csv")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn degree_two_parameter_reference_values() {
    let text = run_ok(&[
        "degree", "--chi", "2", "--rho1", "1.5", "--rho2", "1.5,2.5,3.5", "--format", "csv",
    ]);
    let (header, rows) = csv_cells(&text);
    assert_eq!(header, ["chi", "rho1", "rho2", "degree"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], ["2", "3/2", "3/2", "-1"]);
    assert_eq!(rows[1], ["2", "3/2", "5/2", "0"]);
    assert_eq!(rows[2], ["2", "3/2", "7/2", "2"]);

    let text = run_ok(&[
        "degree", "--chi", "0", "--rho1", "0.5", "--rho2", "2.5", "--format", "csv",
    ]);
    let (_, rows) = csv_cells(&text);
    assert_eq!(rows[0][3], "1");
}

#[test]
fn degree_critical_values_render_as_crit() {
    let text = run_ok(&[
        "degree", "--chi", "2", "--rho1", "1,1.5", "--rho2", "2,2.5", "--format", "csv",
    ]);
    let (_, rows) = csv_cells(&text);
    // rho1 = 1 is critical for any rho2; rho2 integer is critical for any
    // rho1; only (3/2, 5/2) is regular.
    let degrees: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(degrees, ["CRIT", "CRIT", "CRIT", "0"]);
}

#[test]
fn degree_table_format_is_aligned_and_json_parses() {
    let text = run_ok(&["degree", "--chi", "2", "--rho1", "1.5", "--rho2", "1.5"]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("chi"));
    assert!(lines[1].chars().all(|c| c == '-' || c == ' '));
    assert!(lines[2].ends_with("-1"));

    let text = run_ok(&[
        "degree", "--chi", "2", "--rho1", "1.5", "--rho2", "1.5", "--format", "json",
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    assert_eq!(parsed[0]["degree"], serde_json::json!(-1));
    assert_eq!(parsed[0]["rho1"], serde_json::json!("3/2"));
}

#[test]
fn degree_singular_mode_counts_with_conical_sources() {
    let text = run_ok(&[
        "degree", "--chi", "0", "--rho1", "2.5,3.5", "--alpha", "2", "--format", "csv",
    ]);
    let (header, rows) = csv_cells(&text);
    assert_eq!(header, ["chi", "rho1", "alpha", "degree"]);
    // chi = 0 with one weight-2 source: coefficients of (sum x^k)^2 (1 - x^3).
    assert_eq!(rows[0][3], "3");
    assert_eq!(rows[1][3], "3");
}

#[test]
fn malformed_inputs_exit_2() {
    for args in [
        vec!["degree", "--chi", "3", "--rho1", "1.5", "--rho2", "1.5"],
        vec!["degree", "--chi", "2", "--rho1", "abc", "--rho2", "1.5"],
        vec!["degree", "--chi", "2", "--rho1", "1.5"],
        vec![
            "degree", "--chi", "2", "--rho1", "1.5", "--rho2", "1.5", "--alpha", "2",
        ],
        vec!["degree", "--chi", "2", "--rho1", "-1.5", "--rho2", "1.5"],
        vec!["solve", "--n", "17"],
        vec!["solve", "--h1", "cos(x"],
        vec!["solve", "--h1", "0"],
        vec!["solve", "--system", "--continue-to", "0.6"],
        vec!["bubble", "--lambdas", "8,10,12"],
        vec!["bubble", "--check", "mass", "--lambdas", "2,3,4"],
    ] {
        let (code, stderr) = run_code(&args);
        assert_eq!(code, 2, "{args:?} should exit 2, stderr: {stderr}");
    }
}

#[test]
fn trivial_solve_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = run_ok(&[
        "solve", "--n", "16", "--rho1", "0.5", "--rho2", "0.5", "--out", out, "--format", "json",
    ]);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["converged"], serde_json::json!(true));
    assert!(report["iterations"].as_u64().unwrap() <= 2);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let (header, rows) = csv_cells(&trace);
    assert_eq!(
        header,
        ["rho1", "rho2", "residual", "max_u", "neg_eigs", "sigma1", "sigma2"]
    );
    assert_eq!(rows.len(), 2);
    assert!(dir.path().join("u.bin").is_file());
}

fn read_field(path: &Path) -> TorusField {
    TorusField::read_binary(path).expect("readable field")
}

#[test]
fn system_and_scalar_solves_are_decompose_consistent() {
    let scalar_dir = tempfile::tempdir().unwrap();
    let system_dir = tempfile::tempdir().unwrap();
    let problem = [
        "--n",
        "16",
        "--rho1",
        "0.5",
        "--rho2",
        "0.5",
        "--h1",
        "1+0.5*cos(2*pi*x)",
        "--h2",
        "1+0.3*cos(2*pi*y)",
    ];
    let mut scalar_args: Vec<&str> = vec!["solve"];
    scalar_args.extend_from_slice(&problem);
    scalar_args.extend_from_slice(&["--out", scalar_dir.path().to_str().unwrap()]);
    run_ok(&scalar_args);

    let mut system_args: Vec<&str> = vec!["solve"];
    system_args.extend_from_slice(&problem);
    system_args.extend_from_slice(&["--system", "--out", system_dir.path().to_str().unwrap()]);
    run_ok(&system_args);

    let u = read_field(&scalar_dir.path().join("u.bin"));
    let v1 = read_field(&system_dir.path().join("v1.bin"));
    let v2 = read_field(&system_dir.path().join("v2.bin"));
    let diff = v1.sub(&v2).unwrap().sub(&u).unwrap();
    assert!(
        diff.linf() < 1e-6,
        "system and scalar solutions disagree: {:e}",
        diff.linf()
    );
}

#[test]
fn continuation_records_one_row_per_target() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&[
        "solve",
        "--n",
        "16",
        "--rho1",
        "0.4",
        "--rho2",
        "0.25",
        "--h1",
        "1+0.5*cos(2*pi*x)",
        "--continue-to",
        "0.5,0.6",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["converged"], serde_json::json!(true));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let (_, rows) = csv_cells(&trace);
    assert_eq!(rows.len(), 3, "start + two targets");
    let t1: f64 = rows[1][0].parse().unwrap();
    let t2: f64 = rows[2][0].parse().unwrap();
    assert!((t1 - 0.5).abs() < 1e-12 && (t2 - 0.6).abs() < 1e-12);
    let r1: f64 = rows[1][2].parse().unwrap();
    let r2: f64 = rows[2][2].parse().unwrap();
    assert!(r1 < 1e-8 && r2 < 1e-8);
}

#[test]
fn blow_up_guard_exits_4_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_code(&[
        "solve",
        "--n",
        "16",
        "--rho1",
        "0.5",
        "--rho2",
        "0.5",
        "--h1",
        "1+0.5*cos(2*pi*x)",
        "--h2",
        "1+0.3*cos(2*pi*y)",
        "--blowup-guard",
        "0.3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 4, "stderr: {stderr}");
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let (_, rows) = csv_cells(&trace);
    assert_eq!(rows.len(), 1, "only the starting state was reached");
    assert!(!dir.path().join("u.bin").exists());
}

#[test]
fn shadow_decoupled_reproduces_the_critical_point_of_h1() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "shadow",
        "--n",
        "16",
        "--rho2",
        "0.5",
        "--h1",
        "exp(0.3*cos(2*pi*x)+0.2*cos(2*pi*y))",
        "--h2",
        "1+0.3*cos(2*pi*(y+0.2))+0.1*sin(2*pi*x)",
        "--p",
        "0.1,0.9",
        "--decoupled",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("shadow.json")).unwrap())
            .unwrap();
    // h1 has its unique maximum at the origin; compare modulo 1.
    for coord in [0, 1] {
        let v = sidecar["p"][coord].as_f64().unwrap();
        let dist = v.min((1.0 - v).abs());
        assert!(dist < 1e-6, "p[{coord}] = {v} is not the origin");
    }
    assert!(sidecar["gradient_residual"].as_f64().unwrap() < 1e-10);
    assert!(sidecar["morse_sign"].is_i64());
    assert!(dir.path().join("shadow_w.bin").is_file());
}

#[test]
fn shadow_field_artifact_round_trips_and_csv_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&[
        "shadow",
        "--n",
        "16",
        "--rho2",
        "0.25",
        "--h1",
        "exp(0.3*cos(2*pi*x)+0.2*cos(2*pi*y))",
        "--p",
        "0.6,0.6",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let (header, rows) = csv_cells(&text);
    assert_eq!(header[0], "p_x");
    assert_eq!(rows.len(), 1);
    let w = read_field(&dir.path().join("shadow_w.bin"));
    assert_eq!(w.grid().n(), 16);
    assert!(w.mean().abs() < 1e-12);
}

#[test]
fn resolution_limits_exit_5() {
    let (code, stderr) = run_code(&["bubble", "--check", "mass", "--lambdas", "26,28,30"]);
    assert_eq!(code, 5, "stderr: {stderr}");
    let (code, stderr) = run_code(&["shadow", "--n", "64"]);
    assert_eq!(code, 5, "stderr: {stderr}");
}

#[test]
fn bubble_mass_csv_has_three_rows_and_a_fitted_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&[
        "bubble",
        "--check",
        "mass",
        "--lambdas",
        "4,5,6",
        "--n",
        "32",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let (header, rows) = csv_cells(&text);
    assert_eq!(
        header,
        ["lambda", "measured", "predicted", "residual", "fitted_exponent"]
    );
    assert_eq!(rows.len(), 3);
    let exponent: f64 = rows[0][4].parse().unwrap();
    assert!(exponent.is_finite());
    assert!(rows.iter().all(|r| r[4] == rows[0][4]));
    let file = std::fs::read_to_string(dir.path().join("mass.csv")).unwrap();
    assert_eq!(file, text, "stdout csv and artifact agree");
}

#[test]
fn bubble_projections_write_one_csv_per_projection() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "bubble",
        "--check",
        "projections",
        "--lambdas",
        "4,5,6",
        "--n",
        "32",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    for name in ["center", "height", "amplitude"] {
        let path = dir.path().join(format!("projection_{name}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let (header, rows) = csv_cells(&text);
        assert_eq!(header[0], "lambda");
        assert_eq!(rows.len(), 3, "{name}");
    }
}

#[test]
fn identical_config_and_seed_give_byte_identical_csv() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for dir in [&d1, &d2] {
        run_ok(&[
            "bubble",
            "--check",
            "mass",
            "--lambdas",
            "4,5,6",
            "--n",
            "32",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
    }
    let a = std::fs::read(d1.path().join("mass.csv")).unwrap();
    let b = std::fs::read(d2.path().join("mass.csv")).unwrap();
    assert_eq!(a, b);

    let run = || {
        run_ok(&[
            "degree", "--chi", "2,0,-2", "--rho1", "0.5,1.5", "--rho2", "0.5,1.5,2.5,3.5",
            "--seed", "7", "--format", "csv",
        ])
    };
    assert_eq!(run(), run());
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"format": "csv", "degree": {"chi": "2", "rho1": "1.5", "rho2": "3.5"}}"#,
    )
    .unwrap();
    let text = run_ok(&["degree", "--config", cfg.to_str().unwrap()]);
    let (_, rows) = csv_cells(&text);
    assert_eq!(rows[0], ["2", "3/2", "7/2", "2"]);

    let text = run_ok(&["degree", "--config", cfg.to_str().unwrap(), "--rho2", "1.5"]);
    let (_, rows) = csv_cells(&text);
    assert_eq!(rows[0], ["2", "3/2", "3/2", "-1"]);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"degree": {"ro1": "1"}}"#).unwrap();
    let (code, _) = run_code(&["degree", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn weight_fields_load_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let grid = TorusGrid::new(16).unwrap();
    let h1 = TorusField::from_fn(grid, |x, _| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos());
    let path = dir.path().join("h1.bin");
    h1.write_binary(&path).unwrap();

    let expr_dir = tempfile::tempdir().unwrap();
    let file_dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "solve", "--n", "16", "--h1", "1+0.5*cos(2*pi*x)", "--out",
        expr_dir.path().to_str().unwrap(),
    ]);
    run_ok(&[
        "solve", "--n", "16", "--h1-file", path.to_str().unwrap(), "--out",
        file_dir.path().to_str().unwrap(),
    ]);
    let a = std::fs::read(expr_dir.path().join("u.bin")).unwrap();
    let b = std::fs::read(file_dir.path().join("u.bin")).unwrap();
    assert_eq!(a, b, "expression and file weights give identical solves");

    // Mismatched resolution is a usage error.
    let (code, _) = run_code(&["solve", "--n", "32", "--h1-file", path.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn every_run_echoes_its_resolved_config() {
    let out = mfe(&["degree", "--chi", "2", "--rho1", "1.5", "--rho2", "1.5"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let echo: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert_eq!(echo["command"], serde_json::json!("degree"));
    assert_eq!(echo["seed"], serde_json::json!(0));
    assert_eq!(echo["params"]["rho1"], serde_json::json!(["3/2"]));
}

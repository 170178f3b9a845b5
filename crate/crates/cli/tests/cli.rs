use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TWISTED_MANUFACTURED: &str = r#"
[geometry]
kind = "twisted"
half_dim = 2
twist = 0.3
points_per_axis = 8

[data]
kind = "manufactured"
phi = [{ wave = [1, 0, 0, 0], amplitude = 0.2, phase = -1.5707963267948966 }, { wave = [0, 0, 1, 0], amplitude = 0.2 }]
"#;

fn acmax(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_acmax"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn twisted(n: usize, twist: f64, data: &str) -> String {
    format!("[geometry]\nkind = \"twisted\"\nhalf_dim = 2\ntwist = {twist}\npoints_per_axis = {n}\n\n[data]\n{data}\n")
}

#[test]
fn twist_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), &twisted(8, 1.5, "kind = \"zero\""), &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("geometries::TwistOutOfRange"), "{}", stderr(&out));
}

#[test]
fn zero_data_gives_zero_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), &twisted(8, 0.3, "kind = \"zero\""), &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "solve");
    assert!(report["result"]["solve"]["b"].as_f64().unwrap().abs() <= 1e-10);
    assert!(dir.path().join("out/phi.csv").exists());
    assert!(read_json(&dir.path().join("out/timing.json"))["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn flow_subcommand_forces_flow_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = "kind = \"constant\"\nvalue = 0.25";
    let out = acmax(dir.path(), &twisted(8, 0.3, data), &["flow"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["result"]["solve"]["path"], "flow");
    assert!((report["result"]["solve"]["b"].as_f64().unwrap() + 0.25).abs() <= 1e-8);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = "kind = \"trig\"\nterms = [{ wave = [1, 0, 1, 0], amplitude = 0.15 }, { wave = [0, 1, 0, 0], amplitude = 0.1, phase = 0.3 }]";
    let config = twisted(8, 0.3, data);
    let a = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let first = fs::read(dir.path().join("out/report.json")).unwrap();
    let phi_first = fs::read(dir.path().join("out/phi.csv")).unwrap();
    let b = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("out/report.json")).unwrap());
    assert_eq!(phi_first, fs::read(dir.path().join("out/phi.csv")).unwrap());
}

#[test]
fn manufactured_convergence_reaches_stencil_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), TWISTED_MANUFACTURED, &["convergence"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/convergence.json"));
    let order = report["result"]["observed_order_phi"].as_f64().unwrap();
    assert!(order >= 3.5, "observed order {order}");
    assert_eq!(report["result"]["fine"]["points_per_axis"], 16);
}

#[test]
fn manufactured_solve_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), TWISTED_MANUFACTURED, &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    let err = report["result"]["manufactured"]["phi_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 1e-2, "phi error {err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{}\n[solver]\nnewton_tolerance = 1e-9\n", twisted(8, 0.3, "kind = \"zero\""));
    let out = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cli::ConfigParse"), "{}", stderr(&out));
}

#[test]
fn invalid_solver_options_name_the_solver_module() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{}\n[solver]\nnewton_tol = -1.0\n", twisted(8, 0.3, "kind = \"zero\""));
    let out = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ma_solver::InvalidOptions"), "{}", stderr(&out));
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "{}\n[solver]\nnewton_max_iter = 1\nt_step_min = 1.0\n",
        twisted(8, 0.3, "kind = \"trig\"\nterms = [{ wave = [1, 0, 0, 0], amplitude = 1.0 }]")
    );
    let out = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("ma_solver::PathStalled"), "{}", stderr(&out));
}

#[test]
fn grid_and_stencil_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), &twisted(8, 0.3, "kind = \"zero\""), &["gauduchon", "--grid-N", "10", "--stencil-order", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["geometry"]["points_per_axis"], 10);
    assert_eq!(report["geometry"]["stencil_order"], 2);
    assert!(report["result"]["gauduchon_defect"].as_f64().unwrap() < 1e-10);
    assert!(dir.path().join("out/u.csv").exists());

    let bad = acmax(dir.path(), &twisted(8, 0.3, "kind = \"zero\""), &["solve", "--grid-N", "7"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("grid::GridTooCoarse"), "{}", stderr(&bad));
}

#[test]
fn verify_writes_suite_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = acmax(dir.path(), &twisted(8, 0.3, "kind = \"zero\""), &["verify", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["result"]["seed"], 4);
    assert_eq!(report["result"]["passed"], true);
    assert_eq!(report["result"]["checks"].as_array().unwrap().len(), 5);
}

#[test]
fn file_data_and_binary_output() {
    let dir = tempfile::tempdir().unwrap();
    let grid = acmax::Grid::periodic(2, 8).unwrap();
    let f = acmax::ScalarField::from_fn(grid, |x| 0.1 * x[0].cos());
    acmax::dump::write_field(&dir.path().join("f.bin"), &f).unwrap();
    let config = format!(
        "{}\n[outputs]\nformats = [\"json\", \"binary\"]\n",
        twisted(8, 0.3, "kind = \"file\"\npath = \"f.bin\"")
    );
    let out = acmax(dir.path(), &config, &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("out/phi.bin").exists());
    assert!(!dir.path().join("out/phi.csv").exists());

    let missing = acmax(dir.path(), &twisted(8, 0.3, "kind = \"file\"\npath = \"nope.csv\""), &["solve"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("grid::Dump"), "{}", stderr(&missing));
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"geometry": {"kind": "flat", "half_dim": 1, "points_per_axis": 16}, "data": {"kind": "constant", "value": 0.5}}"#;
    let out = acmax(dir.path(), config, &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read_json(&dir.path().join("out/report.json"));
    assert!((report["result"]["solve"]["b"].as_f64().unwrap() + 0.5).abs() <= 1e-10);
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, twisted(8, 0.3, "kind = \"zero\"")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_acmax"))
        .args(["solve", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("ACMAX_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ACMAX_THREADS"));
}

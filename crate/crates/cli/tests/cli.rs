use std::path::Path;
use std::process::{Command, Output};

fn homog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homog")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_list_names_every_oracle() {
    let o = homog(&["oracle", "--list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for id in ["harmonic-mean-b0.5", "cell-space-time-b0.5", "kernel-gap-eps0.125"] {
        assert!(text.contains(id), "{text}");
    }
}

#[test]
fn oracle_run_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = homog(&["--out", out, "oracle", "--run", "harmonic-mean-b0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("harmonic-mean-b0.5.json")).unwrap()).unwrap();
    assert!((v["values"]["a_hat"].as_f64().unwrap() - 0.75f64.sqrt()).abs() < 1e-13);
}

#[test]
fn corrector_then_dual() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("c.hgb");
    let b = bundle.to_str().unwrap();
    let o = homog(&["--out", b, "corrector", "--coeff", "separable_space:0.5", "--n", "64", "--nt", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["a_hat"][0].as_f64().unwrap() - 0.75f64.sqrt()).abs() < 1e-10);
    let o = homog(&["dual", "--in", b]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["flux_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["antisymmetry"].as_f64().unwrap(), 0.0);
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_exit_code_follows_the_pass_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let cfg = write_config(dir.path(), r#"{"region": [0.0, 0.5, 0.0, 0.125]}"#);
    let o = homog(&["--out", out.to_str().unwrap(), "run", "--experiment", "smoothing", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("smoothing.csv").exists() && out.join("smoothing_points.csv").exists());
    assert!(stdout(&o).contains("PASS"));

    let cfg = write_config(dir.path(), r#"{"region": [0.0, 0.5, 0.0, 0.125], "window": [3.0, 4.0]}"#);
    let o = homog(&["--out", out.to_str().unwrap(), "run", "--experiment", "smoothing", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn bad_input_is_an_error_not_a_failure() {
    let o = homog(&["run", "--experiment", "thm9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown experiment"));
    let o = homog(&["corrector", "--coeff", "space_time:1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kernel_command_writes_a_sample() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("k");
    let o = homog(&[
        "--out",
        stem.to_str().unwrap(),
        "kernel",
        "--eps",
        "0.25",
        "--times",
        "0.5,1",
        "--x-min",
        "-1",
        "--x-max",
        "1",
        "--gradients",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with("grad_x"));
}

use std::path::Path;
use std::process::{Command, Output};

fn pnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnlab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn layer_writes_artifacts_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("layer");
    let o = pnlab(&["layer", "--n", "512", "--domain", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("layer.csv")).unwrap();
    assert!(csv.starts_with("x,phi,dphi,lphi\n"));
    assert_eq!(csv.lines().count(), 513);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("layer.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["all_pass"], true);
    assert!(json["metrics"]["gamma"].as_f64().unwrap() > 6.0);
}

#[test]
fn particles_accept_explicit_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnlab(&[
        "particles",
        "--gamma",
        "6.283185307179586",
        "--positions",
        "-1,0,1.5",
        "--stress",
        "-0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("particles.csv")).unwrap();
    assert!(csv.starts_with("t,x_1,x_2,x_3,min_dist,bound\n"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "eps = [0.05, 0.1]\n");
    let o = pnlab(&["converge", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly decreasing"));
    let unknown = write(dir.path(), "unknown.toml", "epsilon = 0.1\n");
    assert_eq!(pnlab(&["layer", "--config", &unknown]).status.code(), Some(2));
}

#[test]
fn empty_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.toml", "");
    let o = pnlab(&[
        "suite",
        "--config",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn failing_scenario_fails_the_suite_but_not_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "suite.toml",
        r#"
[[scenario]]
battery = "evolve"
scenario = "edge"
positions = [2.9]
eps = [0.2]
t_end = 0.05
samples = 1
layer = { n = 512, exact = true }
pde = { n = 256, dt_factor = 1.0 }

[[scenario]]
battery = "particles"
scenario = "pair"
gamma = 6.283185307179586
"#,
    );
    let out = dir.path().join("out");
    let o = pnlab(&["suite", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], 1);
    assert_eq!(summary["failed"], 1);
    assert!(out.join("pair/particles.csv").exists());
}

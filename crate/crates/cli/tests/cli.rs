use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const EXAMPLE: &str = include_str!("../../../configs/example.toml");

fn plate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plate-uc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_config_matches_the_library_example() {
    assert_eq!(EXAMPLE, plate_core::config::EXAMPLE);
}

#[test]
fn pipeline_then_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EXAMPLE);
    let out = dir.path().join("out");
    let out_s = out.display().to_string();

    let o = plate(&["pipeline", "--config", &cfg, "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for stage in ["solve", "flatten-chart", "transform", "reflect", "carleman-sweep", "doubling"] {
        assert!(text.lines().any(|l| l.starts_with(stage) && l.contains(" ok ")), "{text}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["carleman"], 7);

    let o = plate(&["pipeline", "--config", &cfg, "--out", &out_s]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("up to date"));

    let o = plate(&["plot-data", "--out", &out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("plots/mass_loglog.dat").exists());
    assert!(out.join("plots/residual_resolution.dat").exists());
}

#[test]
fn single_stage_with_resolution_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), EXAMPLE);
    let out = dir.path().join("out").display().to_string();
    let o = plate(&["solve", "--config", &cfg, "--out", &out, "--resolution", "33"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["resolution"], 33);
    assert_eq!(m["stages"].as_array().unwrap().len(), 1);
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();

    let cfg = write_config(dir.path(), &EXAMPLE.replace("[material]", "[materials]"));
    let o = plate(&["pipeline", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());

    let cfg = write_config(dir.path(), EXAMPLE);
    let o = plate(&["solve", "--config", &cfg, "--out", &out, "--resolution", "100"]);
    assert_eq!(o.status.code(), Some(2));

    let o = plate(&["solve", "--config", "/nonexistent/run.toml", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.toml"));

    let o = plate(&["plot-data", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("doubling.csv"));
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &EXAMPLE.replace("\"1 + 0.2*x1 + 0.1*x1*x2\"", "\"1 - 2*x1\""));
    let out = dir.path().join("out").display().to_string();
    let o = plate(&["pipeline", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAILED"));
}

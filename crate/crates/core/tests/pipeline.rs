use std::fs;
use std::time::Instant;

use plate_core::config::{PipelineConfig, EXAMPLE};
use plate_core::pipeline::{csv_files, run_pipeline, RunManifest, RunOptions, Stage, Status};
use plate_core::plot::emit_plot_data;
use plate_core::Error;

fn read_json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn example_runs_end_to_end_and_reruns_from_checksums() {
    let cfg = PipelineConfig::parse(EXAMPLE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let t = Instant::now();
    let m = run_pipeline(&cfg, out, RunOptions::default()).unwrap();
    eprintln!("first run {:?}", t.elapsed());
    let names: Vec<Stage> = m.stages.iter().map(|r| r.stage).collect();
    assert_eq!(names, Stage::ALL.to_vec());
    assert!(m.stages.iter().all(|r| r.status == Status::Ok), "{m:#?}");
    assert_eq!(m.seeds.carleman, 7);
    assert_eq!(m.seeds.family.len(), 4);

    let d = read_json(&out.join("doubling.json"));
    assert!(d["report"]["kappa"].as_f64().unwrap().is_finite());

    let csvs = csv_files(out, &m);
    assert_eq!(csvs.len(), 6);
    let before: Vec<Vec<u8>> = csvs.iter().map(|p| fs::read(p).unwrap()).collect();

    let t = Instant::now();
    let again = run_pipeline(&cfg, out, RunOptions::default()).unwrap();
    assert!(again.reused);
    assert!(t.elapsed().as_secs_f64() < 1.0);

    let forced = run_pipeline(&cfg, out, RunOptions { target: None, force: true }).unwrap();
    assert!(!forced.reused);
    for (p, b) in csvs.iter().zip(&before) {
        assert_eq!(&fs::read(p).unwrap(), b, "{}", p.display());
    }
    assert_eq!(RunManifest::read(out).unwrap().config_hash, m.config_hash);

    let plots = emit_plot_data(out, &out.join("plots")).unwrap();
    assert_eq!(plots.len(), 4);
    let mass = fs::read_to_string(out.join("plots/mass_loglog.dat")).unwrap();
    assert_eq!(mass.lines().count(), 1 + cfg.doubling.radii.len());
}

#[test]
fn constant_material_reproduces_the_seeded_exponent() {
    // With constant coefficients the plate solution is 2·x1·x2 itself, whose
    // boundary masses grow like s⁶.
    let text = EXAMPLE.replace("\"1 + 0.2*x1 + 0.1*x1*x2\"", "\"1\"");
    let cfg = PipelineConfig::parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&cfg, dir.path(), RunOptions { target: Some(Stage::Doubling), force: false }).unwrap();
    assert!(m.stages.iter().all(|r| r.status == Status::Ok));
    let d = read_json(&dir.path().join("doubling.json"));
    let kappa = d["report"]["kappa"].as_f64().unwrap();
    assert!((kappa - 6.0).abs() < 0.05, "{kappa}");
}

#[test]
fn single_stage_runs_only_its_dependencies() {
    let cfg = PipelineConfig::parse(EXAMPLE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&cfg, dir.path(), RunOptions { target: Some(Stage::FlattenChart), force: false }).unwrap();
    assert_eq!(m.stages.len(), 1);
    assert!(dir.path().join("chart.json").exists());
    assert!(!dir.path().join("solution.grid").exists());
    // A later stage keeps the verified chart record.
    let m = run_pipeline(&cfg, dir.path(), RunOptions { target: Some(Stage::CarlemanSweep), force: false }).unwrap();
    let names: Vec<Stage> = m.stages.iter().map(|r| r.stage).collect();
    assert_eq!(names, vec![Stage::FlattenChart, Stage::CarlemanSweep]);
}

#[test]
fn missing_material_fails_before_any_output() {
    let text = EXAMPLE.replace("[material]", "[materials]");
    let err = PipelineConfig::parse(&text).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn failing_stage_is_recorded_with_its_residual() {
    // μ changes sign inside the plate, so the material check in the first
    // stage trips.
    let text = EXAMPLE.replace("\"1 + 0.2*x1 + 0.1*x1*x2\"", "\"1 - 2*x1\"");
    let cfg = PipelineConfig::parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&cfg, dir.path(), RunOptions { target: Some(Stage::Reflect), force: false }).unwrap_err();
    assert!(!err.is_validation(), "{err}");
    let m = RunManifest::read(dir.path()).unwrap();
    let last = m.stages.last().unwrap();
    assert_eq!(last.status, Status::Failed);
    assert_eq!(last.stage, Stage::Solve);
    assert!(last.error.is_some() && last.residual.is_some(), "{last:?}");
    assert!(m.stage(Stage::Transform).is_none());
}

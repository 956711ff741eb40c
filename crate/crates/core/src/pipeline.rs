//! Runs the stages in order, writes their outputs and a manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::carleman::{self, TestFunctionSpec};
use crate::config::{hex, PipelineConfig};
use crate::conformal::{build_chart, ConformalChart};
use crate::doubling::{
    fit_doubling_constant, frequency, measure_masses, optimize_tau_to_doubling, quasi_doubling_check, QuasiMasses, QuasiRadii,
};
use crate::error::{Error, Result};
use crate::flatten::{assemble_flattened_operator, boundary_equivalence, boundary_residuals_flattened, gamma_coefficient, to_v};
use crate::grid::{FieldFormat, GridField, GridSpec};
use crate::material::PlateConstants;
use crate::plate_solver::{solve, PlateProblem, PlateSolution};
use crate::reflect::{compute_source, reflect_pair, verify_extension, ExtensionReport};

pub const MANIFEST: &str = "manifest.json";

/// Stencil accuracy for the transform and reflection residuals.
const ACCURACY: usize = 2;
/// Per-node factor on the stencil error estimate in the boundary check.
const EQUIVALENCE_FACTOR: f64 = 5.0;
const SOLVE_GATE: f64 = 1e-8;
const CHART_GATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Solve,
    FlattenChart,
    Transform,
    Reflect,
    CarlemanSweep,
    Doubling,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Solve,
        Stage::FlattenChart,
        Stage::Transform,
        Stage::Reflect,
        Stage::CarlemanSweep,
        Stage::Doubling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Solve => "solve",
            Stage::FlattenChart => "flatten-chart",
            Stage::Transform => "transform",
            Stage::Reflect => "reflect",
            Stage::CarlemanSweep => "carleman-sweep",
            Stage::Doubling => "doubling",
        }
    }

    /// The stage and everything it reads, in dependency order.
    pub fn closure(self) -> Vec<Stage> {
        use Stage::*;
        match self {
            Solve => vec![Solve],
            FlattenChart => vec![FlattenChart],
            Transform => vec![Solve, FlattenChart, Transform],
            Reflect => vec![Solve, FlattenChart, Transform, Reflect],
            CarlemanSweep => vec![CarlemanSweep],
            Doubling => vec![Solve, FlattenChart, Transform, Doubling],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: Status,
    /// Name and value of the quantity the stage gate looks at.
    pub residual_name: String,
    pub residual: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub carleman: u64,
    pub family: Vec<TestFunctionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub resolution: usize,
    pub seeds: Seeds,
    pub stages: Vec<StageRecord>,
    /// Set on a run that found every requested output up to date.
    #[serde(default)]
    pub reused: bool,
}

impl RunManifest {
    pub fn stage(&self, s: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == s)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|_| Error::Missing(path.display().to_string()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Run only this stage and what it depends on.
    pub target: Option<Stage>,
    pub force: bool,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

fn verify(dir: &Path, rec: &StageRecord) -> bool {
    rec.status == Status::Ok
        && rec
            .files
            .iter()
            .all(|f| sha256_file(&dir.join(&f.path)).is_ok_and(|h| h == f.sha256))
}

/// Collects the files one stage writes.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<FileRecord>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = fs::read(&path)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), data)?;
        self.record(name)
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.bytes(name, &text)
    }

    fn grid(&mut self, name: &str, field: &GridField) -> Result<()> {
        field.write_to(&self.dir.join(name), FieldFormat::Binary)?;
        self.record(name)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.bytes(name, &buf)
    }
}

/// What a stage hands back besides its files.
struct Gate {
    name: &'static str,
    value: Option<f64>,
}

fn gate(stage: Stage, name: &'static str, value: f64, ok: bool, reason: impl FnOnce() -> String) -> Result<Gate> {
    if ok {
        Ok(Gate { name, value: Some(value) })
    } else {
        Err(Error::Stage {
            stage: stage.name(),
            reason: reason(),
            residual: value,
        })
    }
}

/// Residual carried by an error, when it has one.
fn error_residual(e: &Error) -> Option<f64> {
    match e {
        Error::Stage { residual, .. } => Some(*residual),
        Error::Breakdown { pivot, .. } => Some(*pivot),
        Error::Convexity { value, .. } => Some(*value),
        _ => None,
    }
}

/// In-memory results passed from stage to stage.
#[derive(Default)]
struct State {
    problem: Option<PlateProblem>,
    solution: Option<PlateSolution>,
    relative_residual: Option<f64>,
    chart: Option<ConformalChart>,
    v: Option<GridField>,
    source_parts: Option<(GridSpec, PlateConstants)>,
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    state: State,
}

fn missing(what: &str) -> Error {
    Error::Missing(format!("in-memory result of stage {what}"))
}

/// Half grid over the chart rectangle with `rows` nodes along `y₂`.
fn half_grid(chart: &ConformalChart, rows: usize) -> Result<GridSpec> {
    GridSpec::new(2 * rows - 1, rows, chart.grid.x, chart.grid.y)
}

/// Carries a solution through pullback, twist and reflection.
fn reflect_chain(
    solution: &PlateSolution,
    chart: &ConformalChart,
    material: &PlateConstants,
    rows: usize,
    snap: f64,
) -> Result<(GridField, crate::reflect::ReflectedField)> {
    let grid = half_grid(chart, rows)?;
    let w = chart.pullback_on(solution, grid)?;
    let tw = gamma_coefficient(chart, material, grid);
    let v = to_v(&w, &tw);
    let op = assemble_flattened_operator(chart, material, grid)?;
    let f = compute_source(&v, &tw, &op, ACCURACY)?;
    Ok((v.clone(), reflect_pair(&v, &f, snap)?))
}

impl<'a> Runner<'a> {
    fn problem(&self) -> Result<&PlateProblem> {
        self.state.problem.as_ref().ok_or_else(|| missing("setup"))
    }

    fn rows_for(&self, n: usize) -> usize {
        let res = self.cfg.grid.resolution;
        (self.cfg.reflect_rows() - 1) * (n - 1) / (res - 1) + 1
    }

    fn run(&mut self, stage: Stage, out: &mut Outputs) -> Result<Gate> {
        if stage != Stage::CarlemanSweep && stage != Stage::FlattenChart && self.state.problem.is_none() {
            self.state.problem = Some(self.cfg.problem()?);
        }
        match stage {
            Stage::Solve => self.solve(out),
            Stage::FlattenChart => self.chart(out),
            Stage::Transform => self.transform(out),
            Stage::Reflect => self.reflect(out),
            Stage::CarlemanSweep => self.carleman(out),
            Stage::Doubling => self.doubling(out),
        }
    }

    fn solve(&mut self, out: &mut Outputs) -> Result<Gate> {
        let n = self.cfg.grid.resolution;
        let (sol, rep) = solve(self.problem()?, n)?;
        out.grid("solution.grid", &sol.field)?;
        let convexity = &self.problem()?.material.convexity;
        out.json("solve.json", &json!({ "report": rep, "convexity": convexity }))?;
        let rr = rep.relative_residual;
        self.state.solution = Some(sol);
        self.state.relative_residual = Some(rr);
        gate(Stage::Solve, "relative_residual", rr, rr.is_finite() && rr <= SOLVE_GATE, || {
            format!("relative residual {rr:.3e} above {SOLVE_GATE:e}")
        })
    }

    fn chart(&mut self, out: &mut Outputs) -> Result<Gate> {
        let profile = self.cfg.profile()?;
        let chart = build_chart(&profile, self.cfg.grid.chart_resolution, self.cfg.chart.r1)?;
        chart.write(out.dir, FieldFormat::Text)?;
        for f in ["phi.grid", "psi.grid", "chart.json"] {
            out.record(f)?;
        }
        let diag = chart.diagnostics();
        let bounds = chart.verify_bounds()?;
        out.json("chart_checks.json", &json!({ "diagnostics": diag, "bounds": bounds }))?;
        let cr = diag.cauchy_riemann / diag.max_jacobian_norm;
        let ok = diag.cr_ok(CHART_GATE) && diag.boundary_image <= CHART_GATE && diag.min_det > 0.0 && bounds.passed();
        self.state.chart = Some(chart);
        gate(Stage::FlattenChart, "cauchy_riemann_relative", cr, ok, || {
            format!("chart checks failed: {diag:?} {bounds:?}")
        })
    }

    fn transform(&mut self, out: &mut Outputs) -> Result<Gate> {
        let material = self.problem()?.material.clone();
        let chart = self.state.chart.as_ref().ok_or_else(|| missing("flatten-chart"))?;
        let sol = self.state.solution.as_ref().ok_or_else(|| missing("solve"))?;
        let grid = half_grid(chart, self.cfg.reflect_rows())?;
        let w = chart.pullback_on(sol, grid)?;
        let tw = gamma_coefficient(chart, &material, grid);
        let v = to_v(&w, &tw);
        let op = assemble_flattened_operator(chart, &material, grid)?;
        out.grid("w.grid", &w)?;
        out.grid("v.grid", &v)?;
        out.csv("gamma.csv", |b| {
            writeln!(b, "y1,gamma")?;
            for (i, g) in tw.gamma.iter().enumerate() {
                writeln!(b, "{:.17e},{:.17e}", grid.xi(i), g)?;
            }
            Ok(())
        })?;
        let rep = boundary_residuals_flattened(&w, &v, &tw, &op, ACCURACY);
        let eq = boundary_equivalence(&w, &tw, ACCURACY, EQUIVALENCE_FACTOR);
        out.json("flatten.json", &json!({ "residuals": rep, "equivalence": eq }))?;
        self.state.v = Some(v);
        self.state.source_parts = Some((grid, material));
        let d = eq.max_difference;
        gate(Stage::Transform, "equivalence_max_difference", d, eq.failures == 0, || {
            format!("{} bottom-edge nodes fail the boundary equivalence", eq.failures)
        })
    }

    fn reflect(&mut self, out: &mut Outputs) -> Result<Gate> {
        let snap = self.cfg.reflect.snap;
        let (rho, bands) = (self.cfg.reflect.rho, self.cfg.reflect.bands);
        let chart = self.state.chart.as_ref().ok_or_else(|| missing("flatten-chart"))?;
        let sol = self.state.solution.as_ref().ok_or_else(|| missing("solve"))?;
        let (_, material) = self.state.source_parts.as_ref().ok_or_else(|| missing("transform"))?;
        let rows = self.cfg.reflect_rows();
        let (_, refl) = reflect_chain(sol, chart, material, rows, snap)?;
        let main = verify_extension(&refl, rho, bands, ACCURACY);
        out.grid("vbar.grid", &refl.vbar)?;
        out.grid("fbar.grid", &refl.fbar)?;
        out.csv("residual_annuli.csv", |b| {
            writeln!(b, "r_in,r_out,l2,max")?;
            for a in &main.annuli {
                writeln!(b, "{:.17e},{:.17e},{:.17e},{:.17e}", a.r_in, a.r_out, a.l2, a.max)?;
            }
            Ok(())
        })?;

        // Refinement study over the configured levels.
        let mut levels: Vec<(usize, usize, ExtensionReport, f64)> =
            vec![(self.cfg.grid.resolution, rows, main.clone(), self.state.relative_residual.unwrap_or(f64::NAN))];
        let extra = self.cfg.grid.levels.clone();
        for n in extra {
            let (s, rep) = solve(self.problem()?, n)?;
            let m = self.rows_for(n);
            let chart = self.state.chart.as_ref().unwrap();
            let (_, r) = reflect_chain(&s, chart, material, m, snap)?;
            levels.push((n, m, verify_extension(&r, rho, bands, ACCURACY), rep.relative_residual));
        }
        levels.sort_by_key(|l| l.0);
        let orders: Vec<f64> = levels.windows(2).map(|w| (w[0].2.l2 / w[1].2.l2).log2()).collect();
        out.csv("convergence.csv", |b| {
            writeln!(b, "resolution,rows,h,extension_l2,extension_max,jump_second,solve_relative_residual")?;
            for (n, m, rep, rr) in &levels {
                let h = 1.0 / (*m - 1) as f64;
                writeln!(
                    b,
                    "{n},{m},{h:.17e},{:.17e},{:.17e},{:.17e},{rr:.17e}",
                    rep.l2, rep.max, rep.jumps.second
                )?;
            }
            Ok(())
        })?;
        out.json(
            "reflect.json",
            &json!({
                "extension": main,
                "v_snapped": refl.v_snapped,
                "v_midline_defect": refl.v_midline_defect,
                "orders": orders,
            }),
        )?;
        let ok = refl.v_snapped && main.symmetry_defect == 0.0 && main.l2.is_finite();
        gate(Stage::Reflect, "extension_l2", main.l2, ok, || {
            format!(
                "reflection not odd: snapped {}, midline defect {:e}, symmetry defect {:e}",
                refl.v_snapped, refl.v_midline_defect, main.symmetry_defect
            )
        })
    }

    fn carleman(&mut self, out: &mut Outputs) -> Result<Gate> {
        let c = &self.cfg.carleman;
        let fam = self.cfg.family()?;
        let sw = carleman::sweep(&fam, &c.taus, &c.rs, c.resolution)?;
        out.csv("carleman.csv", |b| sw.write_csv(b))?;
        let flagged = sw.rows.iter().filter(|r| r.cell.flagged).count();
        out.json(
            "carleman.json",
            &json!({
                "family": fam,
                "resolution": c.resolution,
                "c_emp": sw.c_emp,
                "argmax": sw.argmax.map(|k| &sw.rows[k]),
                "max_ratio_by_tau": sw.max_ratio_by_tau,
                "flagged_cells": flagged,
            }),
        )?;
        let all_finite = sw.rows.iter().all(|r| r.cell.lhs().is_finite() && r.cell.rhs.is_finite());
        let v = sw.c_emp.unwrap_or(f64::NAN);
        gate(Stage::CarlemanSweep, "c_emp", v, all_finite && v.is_finite(), || {
            "sweep produced a non-finite cell or no finite ratio".into()
        })
    }

    fn doubling(&mut self, out: &mut Outputs) -> Result<Gate> {
        let d = &self.cfg.doubling;
        let n = self.cfg.grid.mass_resolution;
        let profile = self.cfg.profile()?;
        let sol = self.state.solution.as_ref().ok_or_else(|| missing("solve"))?;
        let v = self.state.v.as_ref().ok_or_else(|| missing("transform"))?;
        let (lo, hi) = {
            let m = &self.problem()?.material.grid;
            (m.y.0, m.y.1)
        };
        let grid = GridSpec::new(n, n, (-profile.r0, profile.r0), (lo, hi))?;
        let u = sol.sample_physical(grid);
        let center = [d.center, profile.g(d.center)];
        let report = measure_masses(&u, &profile, center, &d.radii)?;
        let r_top = d.radii.iter().copied().fold(0.0, f64::max);
        let n_u = frequency(&u, &profile, center, r_top, d.c)?;
        let fitted = fit_doubling_constant(&report);
        out.csv("doubling.csv", |b| report.write_csv(b))?;

        let [r, rbar, rbar0] = d.quasi_radii;
        let radii = QuasiRadii::new(r, rbar, rbar0)?;
        let masses = QuasiMasses::measure(v, radii)?;
        let q = quasi_doubling_check(masses, radii, &d.taus, d.c_candidate)?;
        let statement = if masses.m_r > 0.0 {
            optimize_tau_to_doubling(&q, (masses.m_rbar0 / masses.m_r).max(1.0)).ok()
        } else {
            None
        };
        out.csv("quasi.csv", |b| {
            writeln!(b, "tau,ln_lhs,ln_rhs_near,ln_rhs_far,slack,c_min")?;
            for row in &q.rows {
                writeln!(
                    b,
                    "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    row.tau, row.ln_lhs, row.ln_rhs_near, row.ln_rhs_far, row.slack, row.c_min
                )?;
            }
            Ok(())
        })?;
        out.json(
            "doubling.json",
            &json!({
                "mass_resolution": n,
                "report": report,
                "frequency": { "r0": r_top, "c": d.c, "n": n_u },
                "fitted_constant": fitted,
                "quasi": q,
                "statement": statement,
            }),
        )?;
        let kappa = report.kappa.unwrap_or(f64::NAN);
        gate(Stage::Doubling, "kappa", kappa, kappa.is_finite() && q.frontier_finite(), || {
            report.flag.clone().unwrap_or_else(|| "quasi-doubling frontier is not finite".into())
        })
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(m)?;
    text.push(b'\n');
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Runs the requested stages into `out`. A previous manifest with the same
/// configuration hash whose files still verify makes the run a no-op unless
/// `force` is set. A failing stage stops the run; the manifest then records
/// the stage, its error and the residual that tripped, and the error is
/// returned.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path, opts: RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let stages = opts.target.map_or(Stage::ALL.to_vec(), Stage::closure);
    let previous = RunManifest::read(out).ok().filter(|m| m.config_hash == hash);

    if let (Some(prev), false) = (&previous, opts.force) {
        let done = stages.iter().all(|s| prev.stage(*s).is_some_and(|r| verify(out, r)));
        if done {
            let mut m = prev.clone();
            m.reused = true;
            return Ok(m);
        }
    }

    let fam = cfg.family()?;
    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        resolution: cfg.grid.resolution,
        seeds: Seeds {
            carleman: cfg.carleman.seed,
            family: fam,
        },
        stages: Vec::new(),
        reused: false,
    };
    // Keep verified records of stages this run does not touch.
    if let Some(prev) = &previous {
        manifest.stages = prev
            .stages
            .iter()
            .filter(|r| !stages.contains(&r.stage) && verify(out, r))
            .cloned()
            .collect();
    }

    let mut runner = Runner { cfg, state: State::default() };
    let mut failure = None;
    for &stage in &stages {
        let mut files = Outputs::new(out);
        let t = Instant::now();
        let result = runner.run(stage, &mut files);
        let seconds = t.elapsed().as_secs_f64();
        let record = match &result {
            Ok(g) => StageRecord {
                stage,
                status: Status::Ok,
                residual_name: g.name.into(),
                residual: g.value,
                error: None,
                seconds,
                files: files.files,
            },
            Err(e) => StageRecord {
                stage,
                status: Status::Failed,
                residual_name: "error".into(),
                residual: error_residual(e),
                error: Some(e.to_string()),
                seconds,
                files: files.files,
            },
        };
        manifest.stages.retain(|r| r.stage != stage);
        manifest.stages.push(record);
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
    }
    manifest.stages.sort_by_key(|r| r.stage);
    write_manifest(out, &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Paths of every CSV listed in a manifest.
pub fn csv_files(dir: &Path, m: &RunManifest) -> Vec<PathBuf> {
    m.stages
        .iter()
        .flat_map(|r| r.files.iter())
        .filter(|f| f.path.ends_with(".csv"))
        .map(|f| dir.join(&f.path))
        .collect()
}

//! Pipeline configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::carleman::{self, TestFunctionSpec};
use crate::doubling::QuasiRadii;
use crate::error::{Error, Result};
use crate::expr::{Func1, Func2};
use crate::geometry::BoundaryProfile;
use crate::grid::GridSpec;
use crate::material::{LameField, PlateConstants};
use crate::plate_solver::PlateProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub lambda: String,
    pub mu: String,
    pub h: f64,
    pub alpha0: f64,
    pub gamma0: f64,
    pub lambda0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub g: String,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default = "one")]
    pub m0: f64,
    #[serde(default = "half")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Clamped data on the outer boundary.
    pub outer: String,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Plate nodes per axis.
    pub resolution: usize,
    /// Extra plate resolutions for the residual-vs-resolution study.
    #[serde(default)]
    pub levels: Vec<usize>,
    #[serde(default = "default_chart_resolution")]
    pub chart_resolution: usize,
    /// Nodes along `y₂` of the half grid over `R`; by default
    /// `(resolution - 1)/8 + 1`, which puts chart nodes on plate nodes when
    /// `r₁ = r₀/4`.
    pub reflect_rows: Option<usize>,
    /// Nodes per axis of the Cartesian grid used for masses.
    #[serde(default = "default_mass_resolution")]
    pub mass_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub r1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectConfig {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default = "default_snap")]
    pub snap: f64,
}

impl Default for ReflectConfig {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            bands: default_bands(),
            snap: default_snap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanConfig {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    pub taus: Vec<f64>,
    pub rs: Vec<f64>,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingConfig {
    /// Center on `Γ`, given by its abscissa.
    #[serde(default)]
    pub center: f64,
    pub radii: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
    /// `(r, r̄, r̄₀)` for the quasi-doubling check on `v`.
    pub quasi_radii: [f64; 3],
    pub taus: Vec<f64>,
    #[serde(default = "one")]
    pub c_candidate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub material: MaterialConfig,
    pub profile: ProfileConfig,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub chart: ChartConfig,
    #[serde(default)]
    pub reflect: ReflectConfig,
    pub carleman: CarlemanConfig,
    pub doubling: DoublingConfig,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_chart_resolution() -> usize {
    33
}
fn default_mass_resolution() -> usize {
    257
}
fn default_rho() -> f64 {
    0.9
}
fn default_bands() -> usize {
    3
}
fn default_snap() -> f64 {
    1e-12
}
fn default_r_min() -> f64 {
    0.25
}
fn default_r_max() -> f64 {
    0.9
}
fn default_c() -> f64 {
    4.0
}

fn pow2_plus_one(n: usize) -> bool {
    n >= 3 && (n - 1).is_power_of_two()
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::Missing(path.display().to_string()))?;
        Self::parse(&text)
    }

    /// Replaces the plate resolution, keeping the default reflect rows in
    /// step with it.
    pub fn with_resolution(mut self, n: usize) -> Result<Self> {
        self.grid.resolution = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for &n in std::iter::once(&g.resolution).chain(&g.levels) {
            if !pow2_plus_one(n) || n < 17 {
                return Err(Error::Config(format!("plate resolution {n} must be 2^k + 1 and at least 17")));
            }
        }
        if !pow2_plus_one(g.chart_resolution) {
            return Err(Error::Config(format!("chart resolution {} must be 2^k + 1", g.chart_resolution)));
        }
        if g.mass_resolution < 17 {
            return Err(Error::Config("mass resolution must be at least 17".into()));
        }
        if let Some(m) = g.reflect_rows {
            if m < 5 {
                return Err(Error::Config("reflect_rows must be at least 5".into()));
            }
        }
        let r = &self.reflect;
        if !(r.rho > 0.0 && r.rho <= 1.0) || r.bands == 0 || !(r.snap >= 0.0) {
            return Err(Error::Config("reflect needs 0 < rho <= 1, bands >= 1, snap >= 0".into()));
        }
        let c = &self.carleman;
        if c.count == 0 || c.taus.is_empty() || c.rs.is_empty() {
            return Err(Error::Config("carleman needs count >= 1 and nonempty taus, rs".into()));
        }
        if c.taus.iter().any(|t| !(*t >= 1.0)) || c.rs.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::Config("carleman taus must be >= 1 and rs in (0, 1)".into()));
        }
        if let Some(r) = c.rs.iter().find(|r| **r / 4.0 >= c.r_min) {
            return Err(Error::Config(format!("carleman r = {r} puts B_(r/4) inside the family's inner radius {}", c.r_min)));
        }
        if c.resolution < 17 {
            return Err(Error::Config("carleman resolution must be at least 17".into()));
        }
        let d = &self.doubling;
        if d.radii.is_empty() || d.radii.iter().any(|r| !(*r > 0.0)) || d.taus.is_empty() || !(d.c >= 1.0) {
            return Err(Error::Config("doubling needs positive radii, nonempty taus and C >= 1".into()));
        }
        QuasiRadii::new(d.quasi_radii[0], d.quasi_radii[1], d.quasi_radii[2]).map_err(|e| Error::Config(e.to_string()))?;
        // Expressions are checked here so that a bad string fails before any
        // numerical work.
        self.lame()?;
        self.profile()?;
        self.outer()?;
        Ok(())
    }

    pub fn reflect_rows(&self) -> usize {
        self.grid.reflect_rows.unwrap_or((self.grid.resolution - 1) / 8 + 1)
    }

    pub fn lame(&self) -> Result<LameField> {
        let m = &self.material;
        Ok(LameField {
            lambda: Func2::parse(&m.lambda)?,
            mu: Func2::parse(&m.mu)?,
            h: m.h,
            alpha0: m.alpha0,
            gamma0: m.gamma0,
            lambda0: m.lambda0,
        })
    }

    pub fn profile(&self) -> Result<BoundaryProfile> {
        let p = &self.profile;
        BoundaryProfile::new(Func1::parse(&p.g)?, p.r0, p.m0, p.alpha)
    }

    fn outer(&self) -> Result<(Func2, Option<Func2>)> {
        let outer = Func2::parse(&self.problem.outer)?;
        let source = self.problem.source.as_deref().map(Func2::parse).transpose()?;
        Ok((outer, source))
    }

    /// Plate constants checked on a grid covering `Ω`.
    pub fn material(&self) -> Result<PlateConstants> {
        let profile = self.profile()?;
        let r0 = profile.r0;
        let gs: Vec<f64> = (0..=32).map(|k| profile.g(-r0 + r0 * k as f64 / 16.0)).collect();
        let lo = gs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + profile.height();
        let grid = GridSpec::new(33, 33, (-r0, r0), (lo, hi))?;
        self.lame()?.derive_plate_constants(&grid, None)
    }

    pub fn problem(&self) -> Result<PlateProblem> {
        let (outer, source) = self.outer()?;
        Ok(PlateProblem {
            profile: self.profile()?,
            material: self.material()?,
            outer,
            source,
        })
    }

    pub fn family(&self) -> Result<Vec<TestFunctionSpec>> {
        let c = &self.carleman;
        carleman::family(c.count, c.seed, c.r_min, c.r_max)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A small configuration that runs every stage in a few seconds.
pub const EXAMPLE: &str = r#"[material]
lambda = "0.5"
mu = "1 + 0.2*x1 + 0.1*x1*x2"
h = 1.0
alpha0 = 0.5
gamma0 = 1.0
lambda0 = 10.0

[profile]
g = "0"

[problem]
outer = "2*x1*x2"

[grid]
resolution = 65
levels = [129]
chart_resolution = 33
mass_resolution = 257

[carleman]
count = 4
seed = 7
taus = [2.0, 5.0, 10.0, 20.0]
rs = [0.4, 0.8]
resolution = 129

[doubling]
radii = [0.05, 0.07, 0.1, 0.14, 0.2, 0.28, 0.4, 0.56, 0.8, 1.0]
quasi_radii = [0.05, 0.2, 0.8]
taus = [2.0, 5.0, 10.0, 20.0, 50.0]
"#;

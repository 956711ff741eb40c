//! Conformal flattening chart `Φ: R = (-1,1)×(0,1) → Ω_{r0}`.
//!
//! The chart is the analytic map `F(z) = r1 z + i (q(z) - q(0))`, where `q`
//! is a Chebyshev interpolant of `t ↦ g(r1 t)` on `[-1, 1]`. On the real
//! axis `F(t) = (r1 t, q(t) - q(0))`, so the bottom edge lands on the graph
//! of `g` up to the interpolation error, and `Φ(0,0) = (0,0)` holds exactly
//! because `q` has real coefficients.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::BoundaryProfile;
use crate::grid::{FieldFormat, GridField, GridSpec, PlaneField};

/// Chebyshev series `Σ c_k T_k` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chebyshev {
    pub coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at the `n + 1` Chebyshev–Lobatto points.
    pub fn interpolate(f: impl Fn(f64) -> f64, n: usize) -> Self {
        let n = n.max(1);
        let pi = std::f64::consts::PI;
        let vals: Vec<f64> = (0..=n).map(|j| f((pi * j as f64 / n as f64).cos())).collect();
        let mut coeffs = vec![0.0; n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in vals.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * v * (pi * (j * k) as f64 / n as f64).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Self { coeffs }
    }

    /// Doubles the degree until the trailing coefficients fall below `tol`,
    /// then drops the negligible tail.
    pub fn adaptive(f: impl Fn(f64) -> f64, tol: f64, max_degree: usize) -> Self {
        let mut n = 16;
        loop {
            let mut c = Self::interpolate(&f, n);
            let tail = c.coeffs[n.saturating_sub(3)..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tail <= tol || n >= max_degree {
                while c.coeffs.len() > 1 && c.coeffs.last().map_or(false, |v| v.abs() <= tol) {
                    c.coeffs.pop();
                }
                return c;
            }
            n *= 2;
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Clenshaw evaluation at a complex argument.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut b1 = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * z * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + z * b1 - b2
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    pub fn derivative(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self { coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..=n).rev() {
            d[k - 1] = 2.0 * k as f64 * self.coeffs[k] + if k + 1 <= n { d[k + 1] } else { 0.0 };
        }
        d[0] *= 0.5;
        d.pop();
        Self { coeffs: d }
    }
}

/// `F(z) = r1 z + i (q(z) - q(0))` and its first three derivatives.
#[derive(Debug, Clone)]
pub struct ConformalMap {
    pub r1: f64,
    pub q: Chebyshev,
    q0: f64,
    dq: [Chebyshev; 3],
}

impl ConformalMap {
    pub fn new(r1: f64, q: Chebyshev) -> Self {
        let d1 = q.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let q0 = q.eval_real(0.0);
        Self { r1, q, q0, dq: [d1, d2, d3] }
    }

    /// Fits the map to a profile at scale `r1`.
    pub fn fit(profile: &BoundaryProfile, r1: f64) -> Self {
        let g = profile.g.clone();
        let tol = 1e-15 * profile.r0.max(1.0);
        Self::new(r1, Chebyshev::adaptive(move |t| g.eval(r1 * t), tol, 256))
    }

    fn z(y: [f64; 2]) -> Complex64 {
        Complex64::new(y[0], y[1])
    }

    pub fn f(&self, y: [f64; 2]) -> Complex64 {
        let z = Self::z(y);
        self.r1 * z + Complex64::i() * (self.q.eval(z) - self.q0)
    }

    /// Derivative `F^{(k)}` for `k = 1..=4`.
    pub fn df(&self, y: [f64; 2], k: usize) -> Complex64 {
        let z = Self::z(y);
        let i = Complex64::i();
        match k {
            1 => self.r1 + i * self.dq[0].eval(z),
            2..=4 => i * self.dq[k - 1].eval(z),
            _ => panic!("derivative order {k} not available"),
        }
    }

    /// `Φ(y) = (φ, ψ)`.
    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        let w = self.f(y);
        [w.re, w.im]
    }

    /// `DΦ = [[∂1φ, ∂2φ], [∂1ψ, ∂2ψ]]`.
    pub fn jacobian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        let d = self.df(y, 1);
        [[d.re, -d.im], [d.im, d.re]]
    }

    /// `M = (DΦ)⁻¹`.
    pub fn inverse_jacobian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        let d = self.df(y, 1);
        let s = d.norm_sqr();
        [[d.re / s, d.im / s], [-d.im / s, d.re / s]]
    }

    /// `|∇φ|² = det DΦ = |F'|²`.
    pub fn grad_phi_sq(&self, y: [f64; 2]) -> f64 {
        self.df(y, 1).norm_sqr()
    }

    /// Frobenius norm `|DΦ| = √2 |F'|`.
    pub fn jacobian_norm(&self, y: [f64; 2]) -> f64 {
        std::f64::consts::SQRT_2 * self.df(y, 1).norm()
    }

    /// `α = |∇φ|⁻²` with its gradient and Laplacian, from `log α = -2 log|F'|`.
    pub fn alpha(&self, y: [f64; 2]) -> AlphaJet {
        let d1 = self.df(y, 1);
        let d2 = self.df(y, 2);
        let a = 1.0 / d1.norm_sqr();
        // ∂1 log|F'|² = 2 Re(F''/F'), ∂2 log|F'|² = -2 Im(F''/F'); log|F'| is harmonic.
        let r = d2 / d1;
        let grad = [-2.0 * a * r.re, 2.0 * a * r.im];
        let laplacian = 4.0 * a * r.norm_sqr();
        AlphaJet { value: a, grad, laplacian }
    }

    /// Newton inversion of `Φ`, to `1e-10` in chart coordinates.
    pub fn inverse(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let w = Complex64::new(x[0], x[1]);
        let mut z = w / self.r1;
        for _ in 0..60 {
            let y = [z.re, z.im];
            let dz = (self.f(y) - w) / self.df(y, 1);
            z -= dz;
            if dz.norm() <= 1e-10 * (1.0 + z.norm()) {
                let y = [z.re, z.im];
                let dz = (self.f(y) - w) / self.df(y, 1);
                z -= dz;
                return Ok([z.re, z.im]);
            }
        }
        Err(Error::Chart {
            y1: z.re,
            y2: z.im,
            reason: format!("Newton inversion of ({:.6}, {:.6}) did not converge", x[0], x[1]),
        })
    }
}

/// `α = |∇φ|⁻²`, `∇α` and `Δα` at a point.
#[derive(Debug, Clone, Copy)]
pub struct AlphaJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

/// A verified chart sampled on a grid over `R̄`.
#[derive(Debug, Clone)]
pub struct ConformalChart {
    pub profile: BoundaryProfile,
    pub map: ConformalMap,
    pub grid: GridSpec,
    pub phi: GridField,
    pub psi: GridField,
    /// `|DΦ|` at the grid nodes.
    pub jacobian_norm: GridField,
}

/// Residuals of the sampled chart.
#[derive(Debug, Clone, Serialize)]
pub struct ChartDiagnostics {
    pub resolution: usize,
    pub r1: f64,
    pub degree: usize,
    /// `max(|∂1φ - ∂2ψ|, |∂2φ + ∂1ψ|)` from differences of the sampled fields.
    pub cauchy_riemann: f64,
    pub max_jacobian_norm: f64,
    /// `max |ψ - g(φ)|` along the bottom edge.
    pub boundary_image: f64,
    pub origin: f64,
    pub min_det: f64,
    /// Smallest signed area of a grid cell's image, relative to `r1² h1 h2`.
    pub min_cell_orientation: f64,
    /// `max |Δφ|, |Δψ|` from differences, relative to `max|DΦ|`.
    pub harmonic: f64,
    /// `max |DΦᵀDΦ - |∇φ|² I|` with differenced Jacobians, relative to `max |∇φ|²`.
    pub gram_identity: f64,
    /// `max |M Mᵀ - |∇φ|⁻² I|` relative to `max |∇φ|⁻²`.
    pub inverse_gram_identity: f64,
}

impl ChartDiagnostics {
    pub fn cr_ok(&self, rel_tol: f64) -> bool {
        self.cauchy_riemann <= rel_tol * self.max_jacobian_norm
    }
}

/// Measured constants of the chart against the window bounds.
#[derive(Debug, Clone, Serialize)]
pub struct ChartBounds {
    pub r0: f64,
    pub r1: f64,
    pub min_jacobian: f64,
    pub max_jacobian: f64,
    pub min_inverse_jacobian: f64,
    pub max_inverse_jacobian: f64,
    /// Range of `|Φ(y)| / |y|` over `y ≠ 0`.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest `K` with `r0 |y| / K ≤ |Φ(y)|` on the grid.
    pub k_lower: f64,
    /// Smallest `K` for which `B_{r0/K} ∩ Ω_{r0}` stays inside `Φ(R)`.
    pub k_containment: f64,
    pub k: f64,
    /// Normalized `c0 = 1`; `C0` is the smallest value fitting both windows.
    pub c0: f64,
    pub big_c0: f64,
    pub grad_phi_ok: bool,
    pub grad_phi_inv_ok: bool,
    pub stima_phi_ok: bool,
    pub containment_samples: usize,
    pub containment_failures: usize,
}

impl ChartBounds {
    pub fn passed(&self) -> bool {
        self.grad_phi_ok
            && self.grad_phi_inv_ok
            && self.stima_phi_ok
            && self.containment_failures == 0
            && self.k.is_finite()
            && self.big_c0.is_finite()
    }
}

/// Constants record written next to the sampled fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartRecord {
    pub r0: f64,
    pub m0: f64,
    pub alpha: f64,
    pub profile: Option<String>,
    pub r1: f64,
    pub coefficients: Vec<f64>,
    pub resolution: usize,
}

const R1_HALVINGS: usize = 8;

/// Builds the chart at `resolution²` nodes. `r1` defaults to `r0 / 4` and is
/// halved until the image fits inside `Ω̄_{r0}`, `|DΦ| ≤ r0/2` holds and
/// every cell keeps its orientation.
pub fn build_chart(profile: &BoundaryProfile, resolution: usize, r1: Option<f64>) -> Result<ConformalChart> {
    if resolution < 9 {
        return Err(Error::Validation(format!("chart resolution {resolution} is below 9")));
    }
    let grid = GridSpec::new(resolution, resolution, (-1.0, 1.0), (0.0, 1.0))?;
    let mut r1 = r1.unwrap_or(profile.r0 / 4.0);
    if !(r1 > 0.0 && r1 <= profile.r0) {
        return Err(Error::Validation(format!("chart scale r1 = {r1} outside (0, r0]")));
    }
    let mut last = None;
    for _ in 0..=R1_HALVINGS {
        let map = ConformalMap::fit(profile, r1);
        match admissible(profile, &map, &grid) {
            Ok(()) => return Ok(sample(profile, map, grid)),
            Err(e) => last = Some(e),
        }
        r1 *= 0.5;
    }
    Err(last.expect("at least one attempt"))
}

/// Rebuilds a chart from its constants record.
pub fn chart_from_record(record: &ChartRecord, profile: &BoundaryProfile) -> Result<ConformalChart> {
    let grid = GridSpec::new(record.resolution, record.resolution, (-1.0, 1.0), (0.0, 1.0))?;
    let map = ConformalMap::new(
        record.r1,
        Chebyshev {
            coeffs: record.coefficients.clone(),
        },
    );
    admissible(profile, &map, &grid)?;
    Ok(sample(profile, map, grid))
}

fn admissible(profile: &BoundaryProfile, map: &ConformalMap, grid: &GridSpec) -> Result<()> {
    let r0 = profile.r0;
    let hgt = profile.height();
    let tol = 1e-9 * r0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let y = grid.coord(i, j);
            let reject = |reason: String| Error::Chart { y1: y[0], y2: y[1], reason };
            let d = map.df(y, 1);
            // Re F' > 0 on the convex rectangle makes F univalent.
            if !(d.re > 0.0) {
                return Err(reject(format!("Re F' = {:.3e} is not positive", d.re)));
            }
            if map.jacobian_norm(y) > 0.5 * r0 {
                return Err(reject(format!("|DΦ| = {:.4e} exceeds r0/2", map.jacobian_norm(y))));
            }
            let [x1, x2] = map.eval(y);
            if x1.abs() > r0 || x2.abs() > hgt {
                return Err(reject(format!("image ({x1:.4e}, {x2:.4e}) leaves the chart rectangle")));
            }
            if j > 0 && x2 <= profile.g(x1) - tol {
                return Err(reject(format!("image ({x1:.4e}, {x2:.4e}) lies below the boundary")));
            }
        }
    }
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            if cell_area(map, grid, i, j) <= 0.0 {
                let y = grid.coord(i, j);
                return Err(Error::Chart {
                    y1: y[0],
                    y2: y[1],
                    reason: "cell image is not positively oriented".into(),
                });
            }
        }
    }
    Ok(())
}

fn cell_area(map: &ConformalMap, grid: &GridSpec, i: usize, j: usize) -> f64 {
    let c = [
        map.eval(grid.coord(i, j)),
        map.eval(grid.coord(i + 1, j)),
        map.eval(grid.coord(i + 1, j + 1)),
        map.eval(grid.coord(i, j + 1)),
    ];
    let mut a = 0.0;
    for k in 0..4 {
        let p = c[k];
        let q = c[(k + 1) % 4];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn sample(profile: &BoundaryProfile, map: ConformalMap, grid: GridSpec) -> ConformalChart {
    let phi = GridField::from_fn(grid, |y| map.eval(y)[0]);
    let psi = GridField::from_fn(grid, |y| map.eval(y)[1]);
    let jacobian_norm = GridField::from_fn(grid, |y| map.jacobian_norm(y));
    ConformalChart {
        profile: profile.clone(),
        map,
        grid,
        phi,
        psi,
        jacobian_norm,
    }
}

impl ConformalChart {
    pub fn r1(&self) -> f64 {
        self.map.r1
    }

    pub fn eval(&self, y: [f64; 2]) -> [f64; 2] {
        self.map.eval(y)
    }

    pub fn inverse(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        self.map.inverse(x)
    }

    pub fn record(&self) -> ChartRecord {
        ChartRecord {
            r0: self.profile.r0,
            m0: self.profile.m0,
            alpha: self.profile.alpha,
            profile: self.profile.g.source().map(str::to_owned),
            r1: self.map.r1,
            coefficients: self.map.q.coeffs.clone(),
            resolution: self.grid.nx,
        }
    }

    /// Writes `phi`, `psi` and `chart.json` into `dir`.
    pub fn write(&self, dir: &Path, format: FieldFormat) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.phi.write_to(&dir.join("phi.grid"), format)?;
        self.psi.write_to(&dir.join("psi.grid"), format)?;
        let json = serde_json::to_string_pretty(&self.record())?;
        std::fs::write(dir.join("chart.json"), json + "\n")?;
        Ok(())
    }

    pub fn diagnostics(&self) -> ChartDiagnostics {
        let g = self.grid;
        let acc = 6;
        let p1 = fd::partial(&self.phi, 1, 0, acc);
        let p2 = fd::partial(&self.phi, 0, 1, acc);
        let s1 = fd::partial(&self.psi, 1, 0, acc);
        let s2 = fd::partial(&self.psi, 0, 1, acc);
        let lap_phi = fd::laplacian(&self.phi, acc);
        let lap_psi = fd::laplacian(&self.psi, acc);
        let mut cr = 0.0f64;
        let mut harmonic = 0.0f64;
        let mut gram = 0.0f64;
        let mut inv_gram = 0.0f64;
        let mut max_sq = 0.0f64;
        let mut max_inv_sq = 0.0f64;
        let mut min_det = f64::INFINITY;
        for k in 0..g.len() {
            let (a, b, c, d) = (p1.values[k], p2.values[k], s1.values[k], s2.values[k]);
            cr = cr.max((a - d).abs()).max((b + c).abs());
            harmonic = harmonic.max(lap_phi.values[k].abs()).max(lap_psi.values[k].abs());
            // DΦᵀDΦ with columns (a, c) and (b, d).
            let sq = a * a + b * b;
            let gtg = [a * a + c * c - sq, a * b + c * d, b * b + d * d - sq];
            gram = gram.max(gtg.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let det = a * d - b * c;
            min_det = min_det.min(det);
            // M = adj / det, M Mᵀ = adj adjᵀ / det².
            let m = [[d / det, -b / det], [-c / det, a / det]];
            let mmt = [
                m[0][0] * m[0][0] + m[0][1] * m[0][1] - 1.0 / sq,
                m[0][0] * m[1][0] + m[0][1] * m[1][1],
                m[1][0] * m[1][0] + m[1][1] * m[1][1] - 1.0 / sq,
            ];
            inv_gram = inv_gram.max(mmt.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            max_sq = max_sq.max(sq);
            max_inv_sq = max_inv_sq.max(1.0 / sq);
        }
        let max_jac = self.jacobian_norm.max_abs();
        let boundary_image = (0..g.nx)
            .map(|i| {
                let k = g.index(i, 0);
                (self.psi.values[k] - self.profile.g(self.phi.values[k])).abs()
            })
            .fold(0.0, f64::max);
        let o = self.map.eval([0.0, 0.0]);
        let cell_scale = self.map.r1.powi(2) * g.hx() * g.hy();
        let mut min_cell = f64::INFINITY;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx - 1 {
                min_cell = min_cell.min(cell_area(&self.map, &g, i, j) / cell_scale);
            }
        }
        ChartDiagnostics {
            resolution: g.nx,
            r1: self.map.r1,
            degree: self.map.q.degree(),
            cauchy_riemann: cr,
            max_jacobian_norm: max_jac,
            boundary_image,
            origin: o[0].abs().max(o[1].abs()),
            min_det,
            min_cell_orientation: min_cell,
            harmonic: harmonic / max_jac,
            gram_identity: gram / max_sq,
            inverse_gram_identity: inv_gram / max_inv_sq,
        }
    }

    /// Measures `K`, `c0`, `C0` and checks the window bounds. Containment of
    /// `B_{r0/K} ∩ Ω_{r0}` in `Φ(R)` is verified by inverting sampled points.
    pub fn verify_bounds(&self) -> Result<ChartBounds> {
        let g = self.grid;
        let r0 = self.profile.r0;
        let mut min_j = f64::INFINITY;
        let mut max_j = 0.0f64;
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        let mut edge_dist = f64::INFINITY;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let y = g.coord(i, j);
                let jn = self.jacobian_norm.get(i, j);
                min_j = min_j.min(jn);
                max_j = max_j.max(jn);
                let x = [self.phi.get(i, j), self.psi.get(i, j)];
                let nx = x[0].hypot(x[1]);
                let ny = y[0].hypot(y[1]);
                if ny > 0.0 {
                    min_ratio = min_ratio.min(nx / ny);
                    max_ratio = max_ratio.max(nx / ny);
                }
                let on_edge = i == 0 || i == g.nx - 1 || j == g.ny - 1;
                if on_edge {
                    edge_dist = edge_dist.min(nx);
                }
            }
        }
        if !(min_ratio > 0.0) {
            return Err(Error::Bounds("|Φ(y)|/|y| reaches zero, no finite K".into()));
        }
        // For a conformal map |DΦ⁻¹| = 2 / |DΦ| in the Frobenius norm.
        let min_inv = 2.0 / max_j;
        let max_inv = 2.0 / min_j;
        let k_lower = r0 / min_ratio;
        let k_containment = r0 / edge_dist;
        let k = k_lower.max(k_containment);
        let big_c0 = f64::max(r0 / (2.0 * min_j), max_inv * r0 / 4.0).max(1.0 + 1e-12);
        let c0 = 1.0;
        let tol = 1e-12;
        let grad_phi_ok = min_j >= c0 * r0 / (2.0 * big_c0) * (1.0 - tol) && max_j <= 0.5 * r0 * (1.0 + tol);
        let grad_phi_inv_ok = min_inv >= 4.0 / r0 * (1.0 - tol) && max_inv <= 4.0 * big_c0 / (c0 * r0) * (1.0 + tol);
        let stima_phi_ok = max_ratio <= 0.5 * r0 * (1.0 + tol);

        let radius = r0 / k;
        let mut samples = 0;
        let mut failures = 0;
        let nr = 24;
        let nt = 64;
        for a in 1..=nr {
            let rho = radius * a as f64 / nr as f64 * (1.0 - 1e-9);
            for b in 0..=nt {
                let th = std::f64::consts::PI * b as f64 / nt as f64;
                let x = [rho * th.cos(), rho * th.sin()];
                if !(x[1] > self.profile.g(x[0])) {
                    continue;
                }
                samples += 1;
                match self.map.inverse(x) {
                    Ok(y) if y[0] > -1.0 && y[0] < 1.0 && y[1] > -1e-12 && y[1] < 1.0 => {}
                    _ => failures += 1,
                }
            }
        }
        Ok(ChartBounds {
            r0,
            r1: self.map.r1,
            min_jacobian: min_j,
            max_jacobian: max_j,
            min_inverse_jacobian: min_inv,
            max_inverse_jacobian: max_inv,
            min_ratio,
            max_ratio,
            k_lower,
            k_containment,
            k,
            c0,
            big_c0,
            grad_phi_ok,
            grad_phi_inv_ok,
            stima_phi_ok,
            containment_samples: samples,
            containment_failures: failures,
        })
    }

    /// `w(y) = u(Φ(y))` on the chart grid.
    pub fn pullback(&self, u: &impl PlaneField) -> Result<GridField> {
        self.pullback_on(u, self.grid)
    }

    /// `w = u ∘ Φ` sampled on an arbitrary grid over `R̄`.
    pub fn pullback_on(&self, u: &impl PlaneField, grid: GridSpec) -> Result<GridField> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let x = self.map.eval(grid.coord(i, j));
                values.push(u.value_at(x).ok_or(Error::Extrapolation { x: x[0], y: x[1] })?);
            }
        }
        Ok(GridField {
            grid,
            values,
            mask: None,
        })
    }
}

/// Result of comparing `(Δu)∘Φ` with `|∇φ|⁻² Δw`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PullbackCheck {
    pub absolute: f64,
    /// `sup|(Δu)∘Φ| + sup|w| / r1²`.
    pub scale: f64,
    pub normalized: f64,
}

/// Checks `(Δu)∘Φ = |∇φ|⁻² Δw` at the interior nodes of `w`'s grid, two rows
/// away from each edge. `u` lives on a physical grid covering `Φ(R)`.
pub fn laplacian_pullback_check(u: &GridField, w: &GridField, chart: &ConformalChart, accuracy: usize) -> Result<PullbackCheck> {
    let lap_u = fd::laplacian(u, accuracy);
    let lap_w = fd::laplacian(w, accuracy);
    let g = w.grid;
    let mut absolute = 0.0f64;
    let mut sup_lu = 0.0f64;
    for j in 2..g.ny - 2 {
        for i in 2..g.nx - 2 {
            let y = g.coord(i, j);
            let x = chart.map.eval(y);
            let lu = lap_u.interpolate(x).ok_or(Error::Extrapolation { x: x[0], y: x[1] })?;
            let rhs = lap_w.get(i, j) / chart.map.grad_phi_sq(y);
            absolute = absolute.max((lu - rhs).abs());
            sup_lu = sup_lu.max(lu.abs());
        }
    }
    let scale = sup_lu + w.max_abs() / chart.map.r1.powi(2);
    Ok(PullbackCheck {
        absolute,
        scale,
        normalized: if scale > 0.0 { absolute / scale } else { absolute },
    })
}

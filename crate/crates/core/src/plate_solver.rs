//! Supported-plate problem on `Ω_{r0}`.
//!
//! The domain is mapped to the rectangle `[-r0, r0] × [0, T]`, `T = 2 M0 r0`,
//! by `x1 = s`, `x2 = g(s)(1 - t/T) + t`, which sends `t = 0` onto `Γ_{r0}`
//! and `t = T` onto the top edge. The discrete energy
//! `∫ c_ijlk ∂²_lk u ∂²_ij u` is a sum of squared difference forms of the
//! physical Hessian: the diagonal part at nodes, the mixed part at cell
//! centers. Its minimizer under the constraints is the discrete solution:
//!
//! * left, right and top edges are clamped: values on the edge and on a
//!   ghost ring outside it come from the prescribed outer data;
//! * `u = 0` on the `Γ` row;
//! * the ghost row below `Γ` is free, so the moment condition
//!   `B(1-ν)∂²_nn u + BνΔu = 0` comes out of the variational equations.
//!
//! For a flat boundary with constant coefficients the interior equations are
//! the 13-point biharmonic stencil.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Func2;
use crate::geometry::BoundaryProfile;
use crate::grid::{GridField, GridSpec, PlaneField};
use crate::linalg::{solve_spd, BandedSym, MatrixSink};
use crate::material::PlateConstants;

/// A supported-plate problem with clamped outer data.
#[derive(Debug, Clone)]
pub struct PlateProblem {
    pub profile: BoundaryProfile,
    pub material: PlateConstants,
    /// Closed-form data on `∂Ω_{r0} \ Γ_{r0}`; its values on the ghost ring
    /// fix the normal derivative there.
    pub outer: Func2,
    /// Manufactured right-hand side `L(u*)`; `None` for the homogeneous plate.
    pub source: Option<Func2>,
}

/// The boundary-fitted map from `(s, t)` to `x`.
#[derive(Debug, Clone)]
pub struct PlateMap {
    pub profile: BoundaryProfile,
    pub height: f64,
}

/// Geometric coefficients of the map at one point.
#[derive(Debug, Clone, Copy)]
struct MapCoeffs {
    x2_t: f64,
    /// Entries of `P = J⁻¹ = [[1, 0], [p21, p22]]`.
    p21: f64,
    p22: f64,
    /// Hessian of `x2(s, t)`: `[[hx11, hx12], [hx12, 0]]`.
    hx11: f64,
    hx12: f64,
}

impl PlateMap {
    pub fn new(profile: &BoundaryProfile) -> Result<Self> {
        let height = profile.height();
        let n = 257;
        for k in 0..n {
            let s = -profile.r0 + 2.0 * profile.r0 * k as f64 / (n - 1) as f64;
            if profile.g(s).abs() >= 0.9 * height {
                return Err(Error::Domain(format!(
                    "profile height {:.4} at x1 = {s:.4} leaves no room in R_(r0, 2M0r0)",
                    profile.g(s)
                )));
            }
        }
        Ok(Self {
            profile: profile.clone(),
            height,
        })
    }

    pub fn to_physical(&self, s: f64, t: f64) -> [f64; 2] {
        [s, self.profile.g(s) * (1.0 - t / self.height) + t]
    }

    pub fn to_computational(&self, x: [f64; 2]) -> (f64, f64) {
        let g = self.profile.g(x[0]);
        (x[0], (x[1] - g) / (1.0 - g / self.height))
    }

    fn coeffs_with(&self, g: f64, gp: f64, gpp: f64, t: f64) -> MapCoeffs {
        let tt = self.height;
        let x2_t = 1.0 - g / tt;
        let x2_s = gp * (1.0 - t / tt);
        MapCoeffs {
            x2_t,
            p21: -x2_s / x2_t,
            p22: 1.0 / x2_t,
            hx11: gpp * (1.0 - t / tt),
            hx12: -gp / tt,
        }
    }
}

/// Derivatives of `g` sampled along `s`.
#[derive(Debug, Clone, Copy)]
struct ProfileSample {
    g: f64,
    gp: f64,
    gpp: f64,
}

/// Index layout of the extended grid and the unknowns.
#[derive(Debug, Clone)]
struct Layout {
    nx: usize,
    ny: usize,
    hs: f64,
    ht: f64,
    s0: f64,
    /// Per extended node: unknown index, or `None` if fixed.
    dof: Vec<Option<usize>>,
    fixed: Vec<f64>,
    /// Clamped ghosts follow their mirror node: `u = u[mirror] + fixed`.
    mirror: Vec<Option<usize>>,
    unknowns: usize,
}

impl Layout {
    #[inline]
    fn ext(&self, i: isize, j: isize) -> usize {
        ((j + 1) as usize) * (self.nx + 2) + (i + 1) as usize
    }

    fn s(&self, i: isize) -> f64 {
        self.s0 + i as f64 * self.hs
    }

    fn t(&self, j: isize) -> f64 {
        j as f64 * self.ht
    }

    /// Unknown index and constant offset of an extended node.
    #[inline]
    fn resolve(&self, e: usize) -> (Option<usize>, f64) {
        match self.mirror[e] {
            Some(m) => match self.dof[m] {
                Some(k) => (Some(k), self.fixed[e]),
                None => (None, self.fixed[m] + self.fixed[e]),
            },
            None => match self.dof[e] {
                Some(k) => (Some(k), 0.0),
                None => (None, self.fixed[e]),
            },
        }
    }
}

/// A squared difference form `weight · (Σ c_k u_k)²` on the extended grid.
struct Term<'a> {
    weight: f64,
    entries: &'a [(isize, isize, f64)],
}

/// The discretized problem before any linear algebra.
pub struct Discretization<'p> {
    problem: &'p PlateProblem,
    map: PlateMap,
    layout: Layout,
    node_profile: Vec<ProfileSample>,
    cell_profile: Vec<ProfileSample>,
}

impl<'p> Discretization<'p> {
    pub fn new(problem: &'p PlateProblem, n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::Validation(format!("plate grid needs at least 5 nodes per axis, got {n}")));
        }
        let map = PlateMap::new(&problem.profile)?;
        let (nx, ny) = (n, n);
        let r0 = problem.profile.r0;
        let hs = 2.0 * r0 / (nx - 1) as f64;
        let ht = map.height / (ny - 1) as f64;
        let mut layout = Layout {
            nx,
            ny,
            hs,
            ht,
            s0: -r0,
            dof: vec![None; (nx + 2) * (ny + 2)],
            fixed: vec![0.0; (nx + 2) * (ny + 2)],
            mirror: vec![None; (nx + 2) * (ny + 2)],
            unknowns: 0,
        };
        let mut k = 0;
        // Ghost row below Γ first, then the interior rows.
        for i in 1..nx as isize - 1 {
            let e = layout.ext(i, -1);
            layout.dof[e] = Some(k);
            k += 1;
        }
        for j in 1..ny as isize - 1 {
            for i in 1..nx as isize - 1 {
                let e = layout.ext(i, j);
                layout.dof[e] = Some(k);
                k += 1;
            }
        }
        layout.unknowns = k;
        let (ni, nj) = (nx as isize, ny as isize);
        let s0 = layout.s0;
        let data = |i: isize, j: isize| problem.outer.eval(map.to_physical(s0 + i as f64 * hs, j as f64 * ht));
        for j in -1..=nj {
            for i in -1..=ni {
                let e = layout.ext(i, j);
                if layout.dof[e].is_some() {
                    continue;
                }
                // Ghosts beside the clamped edges mirror the first inner node, so
                // the centered normal difference of u matches that of the data.
                let partner = if i == -1 && (0..nj).contains(&j) {
                    Some((1, j))
                } else if i == ni && (0..nj).contains(&j) {
                    Some((ni - 2, j))
                } else if j == nj && (0..ni).contains(&i) {
                    Some((i, nj - 2))
                } else {
                    None
                };
                if let Some((pi, pj)) = partner {
                    layout.mirror[e] = Some(layout.ext(pi, pj));
                    layout.fixed[e] = data(i, j) - data(pi, pj);
                } else {
                    let on_gamma = j == 0 && i > 0 && i < ni - 1;
                    layout.fixed[e] = if on_gamma { 0.0 } else { data(i, j) };
                }
            }
        }
        let sample = |s: f64| ProfileSample {
            g: problem.profile.g(s),
            gp: problem.profile.dg(s, 1),
            gpp: problem.profile.dg(s, 2),
        };
        let node_profile = (-1..=nx as isize).map(|i| sample(layout.s(i))).collect();
        let cell_profile = (0..nx as isize - 1).map(|i| sample(layout.s(i) + 0.5 * hs)).collect();
        Ok(Self {
            problem,
            map,
            layout,
            node_profile,
            cell_profile,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.layout.unknowns
    }

    fn node_coeffs(&self, i: isize, j: isize) -> MapCoeffs {
        let p = self.node_profile[(i + 1) as usize];
        self.map.coeffs_with(p.g, p.gp, p.gpp, self.layout.t(j))
    }

    /// Visits every squared form of the discrete energy.
    fn for_each_term(&self, mut visit: impl FnMut(Term<'_>)) {
        let l = &self.layout;
        let (hs, ht) = (l.hs, l.ht);
        let mut buf: Vec<(isize, isize, f64)> = Vec::with_capacity(16);
        // Node terms: D (H11² + H22²) + Bν (H11 + H22)².
        for j in 0..l.ny as isize {
            for i in 0..l.nx as isize {
                let mc = self.node_coeffs(i, j);
                let x = self.map.to_physical(l.s(i), l.t(j));
                // Trapezoid weights: with mirrored ghosts this reproduces the
                // standard clamped stencil next to the walls.
                let edge = |k: isize, n: usize| if k == 0 || k == n as isize - 1 { 0.5 } else { 1.0 };
                let w = hs * ht * mc.x2_t * edge(i, l.nx) * edge(j, l.ny);
                let d = self.problem.material.d(x);
                let bnu = self.problem.material.bnu(x);
                let (h11, h22) = nodal_diagonal_hessian(&mc, hs, ht);
                for (form, coef) in [(&h11, d), (&h22, d)] {
                    emit(&mut buf, i, j, form);
                    visit(Term {
                        weight: w * coef,
                        entries: &buf,
                    });
                }
                let mut tr = [0.0; 9];
                for k in 0..9 {
                    tr[k] = h11[k] + h22[k];
                }
                emit(&mut buf, i, j, &tr);
                visit(Term {
                    weight: w * bnu,
                    entries: &buf,
                });
            }
        }
        // Cell terms: 2 D H12².
        for j in 0..l.ny as isize - 1 {
            for i in 0..l.nx as isize - 1 {
                let p = self.cell_profile[i as usize];
                let (s, t) = (l.s(i) + 0.5 * hs, l.t(j) + 0.5 * ht);
                let mc = self.map.coeffs_with(p.g, p.gp, p.gpp, t);
                let x = self.map.to_physical(s, t);
                let w = hs * ht * mc.x2_t;
                let d = self.problem.material.d(x);
                let form = cell_mixed_hessian(&mc, hs, ht);
                buf.clear();
                for b in 0..4 {
                    for a in 0..4 {
                        let c = form[b * 4 + a];
                        if c != 0.0 {
                            buf.push((i - 1 + a as isize, j - 1 + b as isize, c));
                        }
                    }
                }
                visit(Term {
                    weight: 2.0 * w * d,
                    entries: &buf,
                });
            }
        }
    }

    fn bandwidth(&self) -> usize {
        let mut bw = 0;
        self.for_each_term(|term| {
            let ks: Vec<usize> = term
                .entries
                .iter()
                .filter_map(|&(i, j, _)| self.layout.resolve(self.layout.ext(i, j)).0)
                .collect();
            if let (Some(lo), Some(hi)) = (ks.iter().min(), ks.iter().max()) {
                bw = bw.max(hi - lo);
            }
        });
        bw
    }

    /// Adds the stiffness matrix of the free unknowns to `sink` and returns
    /// the right-hand side.
    pub fn assemble(&self, sink: &mut impl MatrixSink) -> Vec<f64> {
        let l = &self.layout;
        let mut rhs = vec![0.0; l.unknowns];
        let mut free: Vec<(usize, f64)> = Vec::with_capacity(16);
        self.for_each_term(|term| {
            free.clear();
            let mut fixed = 0.0;
            for &(i, j, c) in term.entries {
                let (k, offset) = l.resolve(l.ext(i, j));
                if let Some(k) = k {
                    free.push((k, c));
                }
                fixed += c * offset;
            }
            for &(ka, ca) in &free {
                for &(kb, cb) in &free {
                    sink.add(ka, kb, term.weight * ca * cb);
                }
                rhs[ka] -= term.weight * ca * fixed;
            }
        });
        if let Some(f) = &self.problem.source {
            for j in 1..l.ny as isize - 1 {
                for i in 1..l.nx as isize - 1 {
                    let k = l.dof[l.ext(i, j)].expect("interior node is free");
                    let mc = self.node_coeffs(i, j);
                    let x = self.map.to_physical(l.s(i), l.t(j));
                    rhs[k] += f.eval(x) * l.hs * l.ht * mc.x2_t;
                }
            }
        }
        rhs
    }

    /// Fills the extended grid from the unknown vector and the fixed data.
    fn expand(&self, x: &[f64]) -> PlateSolution {
        let l = &self.layout;
        let grid = self.extended_grid();
        let mut field = GridField::zeros(grid);
        for j in -1..=l.ny as isize {
            for i in -1..=l.nx as isize {
                let e = l.ext(i, j);
                let (k, offset) = l.resolve(e);
                field.values[e] = k.map_or(0.0, |k| x[k]) + offset;
            }
        }
        PlateSolution {
            field,
            map: self.map.clone(),
        }
    }

    fn extended_grid(&self) -> GridSpec {
        let l = &self.layout;
        GridSpec {
            nx: l.nx + 2,
            ny: l.ny + 2,
            x: (l.s(-1), l.s(l.nx as isize)),
            y: (l.t(-1), l.t(l.ny as isize)),
        }
    }
}

/// Writes a 3×3 form centered at `(i, j)` into `buf`.
fn emit(buf: &mut Vec<(isize, isize, f64)>, i: isize, j: isize, form: &[f64; 9]) {
    buf.clear();
    for b in 0..3 {
        for a in 0..3 {
            let c = form[b * 3 + a];
            if c != 0.0 {
                buf.push((i - 1 + a as isize, j - 1 + b as isize, c));
            }
        }
    }
}

/// Nodal forms of `H11` and `H22` on the 3×3 neighbourhood (row-major in `t`).
fn nodal_diagonal_hessian(mc: &MapCoeffs, hs: f64, ht: f64) -> ([f64; 9], [f64; 9]) {
    let at = |a: usize, b: usize| b * 3 + a;
    let mut ut = [0.0; 9];
    ut[at(1, 2)] = 0.5 / ht;
    ut[at(1, 0)] = -0.5 / ht;
    let mut uss = [0.0; 9];
    uss[at(0, 1)] = 1.0 / (hs * hs);
    uss[at(1, 1)] = -2.0 / (hs * hs);
    uss[at(2, 1)] = 1.0 / (hs * hs);
    let mut utt = [0.0; 9];
    utt[at(1, 0)] = 1.0 / (ht * ht);
    utt[at(1, 1)] = -2.0 / (ht * ht);
    utt[at(1, 2)] = 1.0 / (ht * ht);
    let mut ust = [0.0; 9];
    let c = 0.25 / (hs * ht);
    ust[at(2, 2)] = c;
    ust[at(0, 0)] = c;
    ust[at(2, 0)] = -c;
    ust[at(0, 2)] = -c;
    let mut h11 = [0.0; 9];
    let mut h22 = [0.0; 9];
    for k in 0..9 {
        // ∂u/∂x2 = U_t / x2_t; K = H_ξU − (∂u/∂x2) H_ξx2.
        let ux2 = ut[k] * mc.p22;
        let k11 = uss[k] - ux2 * mc.hx11;
        let k12 = ust[k] - ux2 * mc.hx12;
        let k22 = utt[k];
        h11[k] = k11 + 2.0 * mc.p21 * k12 + mc.p21 * mc.p21 * k22;
        h22[k] = mc.p22 * mc.p22 * k22;
    }
    (h11, h22)
}

/// Cell-centered form of `H12` on the 4×4 neighbourhood of the cell with
/// lower-left node `(1, 1)` in local coordinates.
fn cell_mixed_hessian(mc: &MapCoeffs, hs: f64, ht: f64) -> [f64; 16] {
    let at = |a: usize, b: usize| b * 4 + a;
    let mut ut = [0.0; 16];
    for (a, b, s) in [(1, 1, -1.0), (2, 1, -1.0), (1, 2, 1.0), (2, 2, 1.0)] {
        ut[at(a, b)] += s * 0.5 / ht;
    }
    let mut ust = [0.0; 16];
    for (a, b, s) in [(1, 1, 1.0), (2, 1, -1.0), (1, 2, -1.0), (2, 2, 1.0)] {
        ust[at(a, b)] += s / (hs * ht);
    }
    let mut utt = [0.0; 16];
    if mc.p21 != 0.0 {
        // Average of the nodal second differences at the four corners.
        for (a, b) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            utt[at(a, b - 1)] += 0.25 / (ht * ht);
            utt[at(a, b)] -= 0.5 / (ht * ht);
            utt[at(a, b + 1)] += 0.25 / (ht * ht);
        }
    }
    let mut h12 = [0.0; 16];
    for k in 0..16 {
        let ux2 = ut[k] * mc.p22;
        let k12 = ust[k] - ux2 * mc.hx12;
        h12[k] = mc.p22 * k12 + mc.p21 * mc.p22 * utt[k];
    }
    h12
}

/// Solver statistics and residuals.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub resolution: usize,
    pub unknowns: usize,
    pub bandwidth: usize,
    /// Discrete L² norm of `L(u) - f` over interior nodes.
    pub interior_residual: f64,
    pub interior_residual_max: f64,
    /// `max |u|` on the `Γ` samples.
    pub boundary_value_residual: f64,
    /// `max |B(1-ν)∂²_nn u + BνΔu|` on the `Γ` samples.
    pub moment_residual: f64,
    pub min_pivot: f64,
    pub max_pivot: f64,
    pub condition_estimate: f64,
    pub relative_residual: f64,
}

/// Discrete solution on the computational grid, ghost ring included.
#[derive(Debug, Clone)]
pub struct PlateSolution {
    /// Values on the extended `(s, t)` grid.
    pub field: GridField,
    pub map: PlateMap,
}

impl PlateSolution {
    /// Samples a closed-form function on the same layout as a solve at
    /// resolution `n` would produce.
    pub fn from_fn(problem: &PlateProblem, n: usize, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let disc = Discretization::new(problem, n)?;
        let grid = disc.extended_grid();
        let map = disc.map.clone();
        let field = GridField::from_fn(grid, |p| f(map.to_physical(p[0], p[1])));
        Ok(Self { field, map })
    }

    /// Number of nodes per axis of the closed computational rectangle.
    pub fn resolution(&self) -> usize {
        self.field.grid.nx - 2
    }

    /// `u(x)` by cubic interpolation in computational coordinates. Points
    /// slightly below `Γ` use the ghost row.
    pub fn value_at(&self, x: [f64; 2]) -> Option<f64> {
        let (s, t) = self.map.to_computational(x);
        self.field.interpolate([s, t])
    }

    /// Samples `u` on a physical grid. Nodes outside the extended
    /// computational rectangle are set to zero and masked out.
    pub fn sample_physical(&self, grid: GridSpec) -> GridField {
        let mut mask = vec![true; grid.len()];
        let mut values = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.index(i, j);
                match self.value_at(grid.coord(i, j)) {
                    Some(v) => values[k] = v,
                    None => mask[k] = false,
                }
            }
        }
        GridField {
            grid,
            values,
            mask: Some(mask),
        }
    }
}

impl PlaneField for PlateSolution {
    fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        PlateSolution::value_at(self, p)
    }
}

/// Assembles and solves the problem at `n` nodes per axis.
pub fn solve(problem: &PlateProblem, n: usize) -> Result<(PlateSolution, SolveReport)> {
    let disc = Discretization::new(problem, n)?;
    let bw = disc.bandwidth();
    let mut a = BandedSym::zeros(disc.unknowns(), bw);
    let rhs = disc.assemble(&mut a);
    let (x, stats) = solve_spd(a, &rhs, 2)?;
    let solution = disc.expand(&x);
    let mut report = residuals(&solution, problem);
    report.unknowns = disc.unknowns();
    report.bandwidth = bw;
    report.min_pivot = stats.min_pivot;
    report.max_pivot = stats.max_pivot;
    report.condition_estimate = stats.condition_estimate;
    report.relative_residual = stats.relative_residual;
    Ok((solution, report))
}

/// Physical Hessian `[H11, H12, H22]` of values on the extended grid at every
/// node with a full 3×3 neighbourhood (others are NaN).
fn physical_hessian(values: &GridField, map: &PlateMap) -> [GridField; 3] {
    let g = values.grid;
    let (hs, ht) = (g.hx(), g.hy());
    let mut out = [GridField::zeros(g), GridField::zeros(g), GridField::zeros(g)];
    for f in out.iter_mut() {
        f.values.iter_mut().for_each(|v| *v = f64::NAN);
    }
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let [s, t] = g.coord(i, j);
            let p = &map.profile;
            let mc = map.coeffs_with(p.g(s), p.dg(s, 1), p.dg(s, 2), t);
            let u = |a: usize, b: usize| values.get(i + a - 1, j + b - 1);
            let ut = (u(1, 2) - u(1, 0)) / (2.0 * ht);
            let uss = (u(0, 1) - 2.0 * u(1, 1) + u(2, 1)) / (hs * hs);
            let utt = (u(1, 0) - 2.0 * u(1, 1) + u(1, 2)) / (ht * ht);
            let ust = (u(2, 2) + u(0, 0) - u(2, 0) - u(0, 2)) / (4.0 * hs * ht);
            let ux2 = ut * mc.p22;
            let k11 = uss - ux2 * mc.hx11;
            let k12 = ust - ux2 * mc.hx12;
            let k22 = utt;
            out[0].set(i, j, k11 + 2.0 * mc.p21 * k12 + mc.p21 * mc.p21 * k22);
            out[1].set(i, j, mc.p22 * k12 + mc.p21 * mc.p22 * k22);
            out[2].set(i, j, mc.p22 * mc.p22 * k22);
        }
    }
    out
}

/// Residuals of a field laid out like a solver output: `L(u) - f` in the
/// interior, with `L(u) = ∂²_ij(c_ijlk ∂²_lk u)` differenced in divergence
/// form through the map (equal to `B(Δ²u + ã·∇Δu + q̃₂(u))`), and both
/// boundary conditions at the `Γ` nodes.
pub fn residuals(u: &PlateSolution, problem: &PlateProblem) -> SolveReport {
    let map = &u.map;
    let g = u.field.grid;
    let mat = &problem.material;
    let [h11, h12, h22] = physical_hessian(&u.field, map);
    let phys = |i: usize, j: usize| {
        let [s, t] = g.coord(i, j);
        map.to_physical(s, t)
    };
    let mut m = [GridField::zeros(g), GridField::zeros(g), GridField::zeros(g)];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let x = phys(i, j);
            let (a, b, c) = (h11.get(i, j), h12.get(i, j), h22.get(i, j));
            let (d, bnu) = (mat.d(x), mat.bnu(x));
            m[0].set(i, j, d * a + bnu * (a + c));
            m[1].set(i, j, d * b);
            m[2].set(i, j, d * c + bnu * (a + c));
        }
    }
    let dm = [
        physical_hessian(&m[0], map),
        physical_hessian(&m[1], map),
        physical_hessian(&m[2], map),
    ];
    let (hs, ht) = (g.hx(), g.hy());
    let mut sum = 0.0;
    let mut max = 0.0f64;
    // Extended index 1 is t = 0; interior nodes start at 2.
    for j in 2..g.ny - 2 {
        for i in 2..g.nx - 2 {
            let x = phys(i, j);
            let l = dm[0][0].get(i, j) + 2.0 * dm[1][1].get(i, j) + dm[2][2].get(i, j);
            let f = problem.source.as_ref().map_or(0.0, |f| f.eval(x));
            let r = l - f;
            let [s, t] = g.coord(i, j);
            let p = &map.profile;
            let w = hs * ht * map.coeffs_with(p.g(s), p.dg(s, 1), p.dg(s, 2), t).x2_t;
            sum += r * r * w;
            max = max.max(r.abs());
        }
    }
    let mut bval = 0.0f64;
    let mut bmom = 0.0f64;
    for i in 1..g.nx - 1 {
        let x = phys(i, 1);
        bval = bval.max(u.field.get(i, 1).abs());
        let gp = map.profile.dg(x[0], 1);
        let norm = (1.0 + gp * gp).sqrt();
        let n = [gp / norm, -1.0 / norm];
        let (a, b, c) = (h11.get(i, 1), h12.get(i, 1), h22.get(i, 1));
        let dnn = n[0] * n[0] * a + 2.0 * n[0] * n[1] * b + n[1] * n[1] * c;
        bmom = bmom.max((mat.d(x) * dnn + mat.bnu(x) * (a + c)).abs());
    }
    SolveReport {
        resolution: g.nx - 2,
        unknowns: 0,
        bandwidth: 0,
        interior_residual: sum.sqrt(),
        interior_residual_max: max,
        boundary_value_residual: bval,
        moment_residual: bmom,
        min_pivot: f64::NAN,
        max_pivot: f64::NAN,
        condition_estimate: f64::NAN,
        relative_residual: f64::NAN,
    }
}

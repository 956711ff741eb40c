//! The plate equation carried to the rectangle `R` by a conformal chart.
//!
//! With `w = u∘Φ` and `α = |∇φ|⁻²`, the operator `Δ²u + ã·∇Δu + q̃₂(u)`
//! becomes `α² ℒ(w)` with `ℒ(w) = Δ²w + b·∇Δw + Q₂(w)`, where
//! `b = (2∇α + M ã∘Φ)/α` and `M = (DΦ)⁻¹`. The supported boundary condition
//! turns into `Δw + γ ∂₂w = 0` on `y₂ = 0`, and `v = e^{y₂γ/2} w` satisfies
//! `Δv = 0` there.

use serde::Serialize;

use crate::conformal::ConformalChart;
use crate::error::{Error, Result};
use crate::fd;
use crate::grid::{GridField, GridSpec};
use crate::material::PlateConstants;

/// Coefficients of `ℒ` sampled on a grid over `R̄`.
#[derive(Debug, Clone)]
pub struct FlattenedOperator {
    pub grid: GridSpec,
    /// Drift `b` in front of `∇Δw`.
    pub b: [GridField; 2],
    /// `Q₂` coefficients of `[w1, w2, w11, w12, w22]`.
    pub q2: [GridField; 5],
}

/// Jet of `w` at one node: `[w1, w2, w11, w12, w22]`.
pub type Jet2 = [f64; 5];

/// Pointwise coefficients of `ℒ` at `y`, from the chart and the material.
pub fn operator_coefficients(chart: &ConformalChart, material: &PlateConstants, y: [f64; 2]) -> Result<([f64; 2], Jet2)> {
    let map = &chart.map;
    let d1 = map.df(y, 1);
    if d1.norm() < 1e-12 {
        return Err(Error::Degenerate(format!("|∇φ| = {:.3e} at y = ({:.4}, {:.4})", d1.norm(), y[0], y[1])));
    }
    let ex = material.expanded()?;
    let x = map.eval(y);
    let jet = map.alpha(y);
    let a = jet.value;
    let m = map.inverse_jacobian(y);
    let at = ex.a_tilde(x);
    let ma = [m[0][0] * at[0] + m[0][1] * at[1], m[1][0] * at[0] + m[1][1] * at[1]];
    let b = [(2.0 * jet.grad[0] + ma[0]) / a, (2.0 * jet.grad[1] + ma[1]) / a];

    // Δw terms from Δ²u and ã·∇Δu.
    let kappa = jet.laplacian / a + (ma[0] * jet.grad[0] + ma[1] * jet.grad[1]) / (a * a);
    let mut q = [0.0, 0.0, kappa, 0.0, kappa];

    // q̃₂(u)∘Φ through H_x u = Mᵀ (H_y w − Σ_k (∂_k u) H_y Φ_k) M.
    let c = ex.q2_tilde(x);
    let f2 = map.df(y, 2);
    let hphi = [
        [[f2.re, -f2.im], [-f2.im, -f2.re]],
        [[f2.im, f2.re], [f2.re, -f2.im]],
    ];
    let basis: [([f64; 2], [[f64; 2]; 2]); 5] = [
        ([1.0, 0.0], [[0.0; 2]; 2]),
        ([0.0, 1.0], [[0.0; 2]; 2]),
        ([0.0; 2], [[1.0, 0.0], [0.0, 0.0]]),
        ([0.0; 2], [[0.0, 1.0], [1.0, 0.0]]),
        ([0.0; 2], [[0.0, 0.0], [0.0, 1.0]]),
    ];
    for (slot, (gw, hw)) in basis.iter().enumerate() {
        // ∇_x u = Mᵀ ∇w.
        let gu = [m[0][0] * gw[0] + m[1][0] * gw[1], m[0][1] * gw[0] + m[1][1] * gw[1]];
        let mut h = *hw;
        for (k, hk) in hphi.iter().enumerate() {
            for r in 0..2 {
                for s in 0..2 {
                    h[r][s] -= gu[k] * hk[r][s];
                }
            }
        }
        let mut hx = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                for p in 0..2 {
                    for t in 0..2 {
                        hx[r][s] += m[p][r] * h[p][t] * m[t][s];
                    }
                }
            }
        }
        q[slot] += (c[0] * hx[0][0] + c[1] * hx[0][1] + c[2] * hx[1][1]) / (a * a);
    }
    Ok((b, q))
}

/// Samples the coefficients of `ℒ` on `grid`.
pub fn assemble_flattened_operator(chart: &ConformalChart, material: &PlateConstants, grid: GridSpec) -> Result<FlattenedOperator> {
    let mut b = [GridField::zeros(grid), GridField::zeros(grid)];
    let mut q2: [GridField; 5] = std::array::from_fn(|_| GridField::zeros(grid));
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (bb, qq) = operator_coefficients(chart, material, grid.coord(i, j))?;
            let k = grid.index(i, j);
            for d in 0..2 {
                b[d].values[k] = bb[d];
            }
            for d in 0..5 {
                q2[d].values[k] = qq[d];
            }
        }
    }
    Ok(FlattenedOperator { grid, b, q2 })
}

/// Finite-difference derivatives of a field needed by `ℒ`.
struct Stack {
    d: Vec<Vec<GridField>>,
}

impl Stack {
    fn new(w: &GridField, accuracy: usize) -> Self {
        Self {
            d: fd::derivative_stack(w, 4, accuracy),
        }
    }

    /// `∂₁^{order-k} ∂₂^k` at node index `n`.
    fn at(&self, order: usize, k: usize, n: usize) -> f64 {
        self.d[order][k].values[n]
    }

    fn bilaplacian(&self, n: usize) -> f64 {
        self.at(4, 0, n) + 2.0 * self.at(4, 2, n) + self.at(4, 4, n)
    }

    fn grad_laplacian(&self, n: usize) -> [f64; 2] {
        [self.at(3, 0, n) + self.at(3, 2, n), self.at(3, 1, n) + self.at(3, 3, n)]
    }

    fn jet(&self, n: usize) -> Jet2 {
        [self.at(1, 0, n), self.at(1, 1, n), self.at(2, 0, n), self.at(2, 1, n), self.at(2, 2, n)]
    }
}

impl FlattenedOperator {
    pub fn max_b(&self) -> f64 {
        self.b[0].max_abs().max(self.b[1].max_abs())
    }

    pub fn max_q2(&self) -> f64 {
        self.q2.iter().map(GridField::max_abs).fold(0.0, f64::max)
    }

    /// `ℒ(w)` by finite differences of the given accuracy.
    pub fn apply(&self, w: &GridField, accuracy: usize) -> GridField {
        assert_eq!(w.grid, self.grid, "operator and field grids differ");
        let s = Stack::new(w, accuracy);
        let mut out = GridField::zeros(self.grid);
        for n in 0..self.grid.len() {
            let gl = s.grad_laplacian(n);
            let jet = s.jet(n);
            let mut v = s.bilaplacian(n) + self.b[0].values[n] * gl[0] + self.b[1].values[n] * gl[1];
            for d in 0..5 {
                v += self.q2[d].values[n] * jet[d];
            }
            out.values[n] = v;
        }
        out
    }
}

/// `γ(y₁)` on the grid abscissae and the field `a = e^{-y₂γ/2}`.
#[derive(Debug, Clone)]
pub struct TwistData {
    pub grid: GridSpec,
    pub gamma: Vec<f64>,
    pub a: GridField,
}

/// `γ = ((1-ν)/2) |∇φ|² ∂₂(|∇φ|⁻²)` on `y₂ = 0`, the normal derivative taken
/// with the one-sided three-point stencil of the grid spacing.
pub fn gamma_coefficient(chart: &ConformalChart, material: &PlateConstants, grid: GridSpec) -> TwistData {
    let h = grid.hy();
    let y0 = grid.y.0;
    let gamma: Vec<f64> = (0..grid.nx)
        .map(|i| {
            let y1 = grid.xi(i);
            let alpha = |t: f64| 1.0 / chart.map.grad_phi_sq([y1, y0 + t]);
            let d2 = (-3.0 * alpha(0.0) + 4.0 * alpha(h) - alpha(2.0 * h)) / (2.0 * h);
            let nu = material.nu(chart.map.eval([y1, y0]));
            0.5 * (1.0 - nu) * chart.map.grad_phi_sq([y1, y0]) * d2
        })
        .collect();
    twist_from_gamma(grid, gamma)
}

/// `γ` from the analytic derivative of `|∇φ|⁻²`.
pub fn gamma_exact(chart: &ConformalChart, material: &PlateConstants, y1: f64) -> f64 {
    let y = [y1, 0.0];
    let jet = chart.map.alpha(y);
    let nu = material.nu(chart.map.eval(y));
    0.5 * (1.0 - nu) * jet.grad[1] / jet.value
}

pub fn twist_from_gamma(grid: GridSpec, gamma: Vec<f64>) -> TwistData {
    assert_eq!(gamma.len(), grid.nx);
    let mut a = GridField::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let y2 = grid.yj(j) - grid.y.0;
            a.set(i, j, (-0.5 * y2 * gamma[i]).exp());
        }
    }
    TwistData { grid, gamma, a }
}

/// `v = w / a = e^{y₂γ/2} w`.
pub fn to_v(w: &GridField, twist: &TwistData) -> GridField {
    w.zip_with(&twist.a, |w, a| w / a)
}

/// `w = a v`.
pub fn to_w(v: &GridField, twist: &TwistData) -> GridField {
    v.zip_with(&twist.a, |v, a| v * a)
}

/// Bottom-edge and interior residuals of the flattened problems.
#[derive(Debug, Clone, Serialize)]
pub struct FlattenReport {
    /// Convention: `ℒ` is normalized so that `Δ²w` has coefficient one.
    pub convention: &'static str,
    pub w_edge: f64,
    /// `max |Δw + γ ∂₂w|` on `y₂ = 0`.
    pub w_condition: f64,
    pub v_edge: f64,
    /// `max |Δv|` on `y₂ = 0`.
    pub v_condition: f64,
    /// `max |ℒ(a v)/a|` over nodes at least two rows from the edges.
    pub interior_max: f64,
    pub interior_l2: f64,
    pub max_b: f64,
    pub max_q2: f64,
}

pub fn boundary_residuals_flattened(w: &GridField, v: &GridField, twist: &TwistData, op: &FlattenedOperator, accuracy: usize) -> FlattenReport {
    let g = w.grid;
    let lap_w = fd::laplacian(w, accuracy);
    let dw2 = fd::partial(w, 0, 1, accuracy);
    let lap_v = fd::laplacian(v, accuracy);
    let mut rep = FlattenReport {
        convention: "leading coefficient of the bilaplacian normalized to one",
        w_edge: 0.0,
        w_condition: 0.0,
        v_edge: 0.0,
        v_condition: 0.0,
        interior_max: 0.0,
        interior_l2: 0.0,
        max_b: op.max_b(),
        max_q2: op.max_q2(),
    };
    for i in 0..g.nx {
        let n = g.index(i, 0);
        rep.w_edge = rep.w_edge.max(w.values[n].abs());
        rep.w_condition = rep.w_condition.max((lap_w.values[n] + twist.gamma[i] * dw2.values[n]).abs());
        rep.v_edge = rep.v_edge.max(v.values[n].abs());
        rep.v_condition = rep.v_condition.max(lap_v.values[n].abs());
    }
    let lw = op.apply(&to_w(v, twist), accuracy);
    let mut sum = 0.0;
    for j in 2..g.ny.saturating_sub(2) {
        for i in 2..g.nx.saturating_sub(2) {
            let n = g.index(i, j);
            let r = lw.values[n] / twist.a.values[n];
            rep.interior_max = rep.interior_max.max(r.abs());
            sum += r * r * g.hx() * g.hy();
        }
    }
    rep.interior_l2 = sum.sqrt();
    rep
}

/// Per-node comparison of `Δv` and `Δw + γ∂₂w` on `y₂ = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub nodes: usize,
    pub max_difference: f64,
    /// Smallest `estimate` among the nodes, for context.
    pub min_estimate: f64,
    /// Nodes where the difference exceeds `factor × estimate`.
    pub failures: usize,
    pub factor: f64,
}

/// Checks `Δv = Δw + γ∂₂w` on the bottom edge. The per-node tolerance is
/// `factor` times a stencil error estimate: the change between accuracy
/// `p` and `p + 2`, plus the rounding level of a second difference.
pub fn boundary_equivalence(w: &GridField, twist: &TwistData, accuracy: usize, factor: f64) -> EquivalenceReport {
    let g = w.grid;
    let v = to_v(w, twist);
    let side = |p: usize| {
        let lv = fd::laplacian(&v, p);
        let lw = fd::laplacian(w, p);
        let d2 = fd::partial(w, 0, 1, p);
        (0..g.nx)
            .map(|i| {
                let n = g.index(i, 0);
                (lv.values[n], lw.values[n] + twist.gamma[i] * d2.values[n])
            })
            .collect::<Vec<_>>()
    };
    let lo = side(accuracy);
    let hi = side(accuracy + 2);
    let h2 = g.hx().min(g.hy()).powi(2);
    let rounding = 64.0 * f64::EPSILON * v.max_abs().max(w.max_abs()) / h2;
    let mut rep = EquivalenceReport {
        nodes: g.nx,
        max_difference: 0.0,
        min_estimate: f64::INFINITY,
        failures: 0,
        factor,
    };
    for i in 0..g.nx {
        let (lv, rhs) = lo[i];
        let est = (lv - hi[i].0).abs() + (rhs - hi[i].1).abs() + rounding;
        let diff = (lv - rhs).abs();
        rep.max_difference = rep.max_difference.max(diff);
        rep.min_estimate = rep.min_estimate.min(est);
        if diff > factor * est {
            rep.failures += 1;
        }
    }
    rep
}

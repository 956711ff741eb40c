//! Lamé moduli, derived plate constants and the expanded plate operator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Func2};
use crate::grid::{GridField, GridSpec};

/// Step used for finite differences of closed-form coefficient fields.
pub const COEFF_FD_STEP: f64 = 1e-3;

/// Lamé moduli as closed-form fields, plate thickness and the convexity and
/// regularity constants they are assumed to satisfy.
#[derive(Debug, Clone)]
pub struct LameField {
    pub lambda: Func2,
    pub mu: Func2,
    pub h: f64,
    pub alpha0: f64,
    pub gamma0: f64,
    pub lambda0: f64,
}

/// Young's modulus from the Lamé moduli.
pub fn young(lambda: f64, mu: f64) -> f64 {
    mu * (2.0 * mu + 3.0 * lambda) / (mu + lambda)
}

/// Poisson's coefficient from the Lamé moduli.
pub fn poisson(lambda: f64, mu: f64) -> f64 {
    lambda / (2.0 * (mu + lambda))
}

/// Bending stiffness through Young's modulus and Poisson's coefficient.
pub fn stiffness(e: f64, nu: f64, h: f64) -> f64 {
    h.powi(3) / 12.0 * e / (1.0 - nu * nu)
}

/// Bending stiffness written directly in the Lamé moduli.
pub fn stiffness_lame(lambda: f64, mu: f64, h: f64) -> f64 {
    h.powi(3) / 3.0 * mu * (mu + lambda) / (2.0 * mu + lambda)
}

/// Outcome of one convexity inequality over a set of nodes.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest `lhs - rhs` over the nodes.
    pub margin: f64,
    pub worst_node: (usize, usize),
    pub worst_point: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub mu_bound: InequalityCheck,
    pub gamma_bound: InequalityCheck,
    pub sum_bound: InequalityCheck,
    pub c2_lambda: f64,
    pub c2_mu: f64,
    pub c2_passed: bool,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.mu_bound.passed && self.gamma_bound.passed && self.sum_bound.passed
    }

    /// `(min mu - alpha0, min (2mu + 3lambda) - gamma0)`.
    pub fn margins(&self) -> (f64, f64) {
        (self.mu_bound.margin, self.gamma_bound.margin)
    }
}

impl LameField {
    pub fn constant(lambda: f64, mu: f64, h: f64, alpha0: f64, gamma0: f64) -> Self {
        Self {
            lambda: Func2::constant(lambda),
            mu: Func2::constant(mu),
            h,
            alpha0,
            gamma0,
            lambda0: f64::INFINITY,
        }
    }

    fn nodes<'a>(grid: &'a GridSpec, mask: Option<&'a [bool]>) -> impl Iterator<Item = (usize, usize)> + 'a {
        (0..grid.ny)
            .flat_map(move |j| (0..grid.nx).map(move |i| (i, j)))
            .filter(move |&(i, j)| mask.map_or(true, |m| m[grid.index(i, j)]))
    }

    /// Checks the convexity inequalities and the C² surrogate bound at every
    /// (unmasked) node of `grid`. Never fails; the report says what held.
    pub fn check_strong_convexity(&self, grid: &GridSpec, mask: Option<&[bool]>) -> ConvexityReport {
        let floor = self.alpha0.min(self.gamma0 / 2.0);
        let mut checks = [
            ("mu >= alpha0", f64::INFINITY, (0, 0)),
            ("2mu + 3lambda >= gamma0", f64::INFINITY, (0, 0)),
            ("mu + lambda >= min(alpha0, gamma0/2)", f64::INFINITY, (0, 0)),
        ];
        for (i, j) in Self::nodes(grid, mask) {
            let p = grid.coord(i, j);
            let (l, m) = (self.lambda.eval(p), self.mu.eval(p));
            let values = [m - self.alpha0, 2.0 * m + 3.0 * l - self.gamma0, m + l - floor];
            for (c, v) in checks.iter_mut().zip(values) {
                // NaN counts as a violation.
                if !(v >= c.1) {
                    *c = (c.0, v, (i, j));
                }
            }
        }
        let make = |(name, margin, node): (&'static str, f64, (usize, usize))| InequalityCheck {
            name,
            passed: margin >= 0.0,
            margin,
            worst_node: node,
            worst_point: grid.coord(node.0, node.1),
        };
        let c2_lambda = c2_surrogate(&self.lambda, grid, mask);
        let c2_mu = c2_surrogate(&self.mu, grid, mask);
        ConvexityReport {
            mu_bound: make(checks[0]),
            gamma_bound: make(checks[1]),
            sum_bound: make(checks[2]),
            c2_lambda,
            c2_mu,
            c2_passed: c2_lambda <= self.lambda0 && c2_mu <= self.lambda0,
        }
    }

    /// Derives `E`, `ν`, `B` after checking convexity at every node.
    pub fn derive_plate_constants(&self, grid: &GridSpec, mask: Option<&[bool]>) -> Result<PlateConstants> {
        if !(self.h > 0.0) || !(self.alpha0 > 0.0) || !(self.gamma0 > 0.0) {
            return Err(Error::Validation("h, alpha0 and gamma0 must be positive".into()));
        }
        let report = self.check_strong_convexity(grid, mask);
        for c in [&report.mu_bound, &report.gamma_bound, &report.sum_bound] {
            if !c.passed {
                return Err(Error::Convexity {
                    i: c.worst_node.0,
                    j: c.worst_node.1,
                    x: c.worst_point[0],
                    y: c.worst_point[1],
                    inequality: c.name,
                    value: c.margin,
                });
            }
        }
        let pc = PlateConstants {
            lame: self.clone(),
            grid: *grid,
            convexity: report,
        };
        for (i, j) in Self::nodes(grid, mask) {
            let p = grid.coord(i, j);
            let b1 = pc.b(p);
            let b2 = pc.b_dual(p);
            if (b1 - b2).abs() > 1e-12 * b1.abs().max(b2.abs()) {
                return Err(Error::Degenerate(format!(
                    "stiffness formulas disagree at node ({i}, {j}): {b1:e} vs {b2:e}"
                )));
            }
        }
        Ok(pc)
    }
}

/// `max(sup|f|, sup|∇f|, sup|D²f|)` with centered differences at the nodes.
fn c2_surrogate(f: &Func2, grid: &GridSpec, mask: Option<&[bool]>) -> f64 {
    let h = COEFF_FD_STEP;
    let mut best = 0.0f64;
    for (i, j) in LameField::nodes(grid, mask) {
        let p = grid.coord(i, j);
        let g = f.gradient(p, h);
        let d2 = f.hessian(p, h);
        let grad = g[0].hypot(g[1]);
        let hess = (d2[0] * d2[0] + 2.0 * d2[1] * d2[1] + d2[2] * d2[2]).sqrt();
        best = best.max(f.eval(p).abs()).max(grad).max(hess);
    }
    best
}

/// Pointwise plate constants, valid on the grid where convexity was checked.
#[derive(Debug, Clone)]
pub struct PlateConstants {
    pub lame: LameField,
    pub grid: GridSpec,
    pub convexity: ConvexityReport,
}

impl PlateConstants {
    #[inline]
    fn lm(&self, p: [f64; 2]) -> (f64, f64) {
        (self.lame.lambda.eval(p), self.lame.mu.eval(p))
    }

    pub fn e(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        young(l, m)
    }

    pub fn nu(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        poisson(l, m)
    }

    pub fn b(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        stiffness(young(l, m), poisson(l, m), self.lame.h)
    }

    pub fn b_dual(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        stiffness_lame(l, m, self.lame.h)
    }

    /// `B(1 - ν)`, the coefficient of the Hessian in the bending moment.
    pub fn d(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        stiffness(young(l, m), poisson(l, m), self.lame.h) * (1.0 - poisson(l, m))
    }

    /// `Bν`, the coefficient of the Laplacian in the bending moment.
    pub fn bnu(&self, p: [f64; 2]) -> f64 {
        let (l, m) = self.lm(p);
        stiffness(young(l, m), poisson(l, m), self.lame.h) * poisson(l, m)
    }

    pub fn sample(&self, f: impl Fn(&Self, [f64; 2]) -> f64) -> GridField {
        GridField::from_fn(self.grid, |p| f(self, p))
    }

    pub fn tensor(&self) -> StiffnessTensor<'_> {
        StiffnessTensor { pc: self }
    }

    pub fn expanded(&self) -> Result<ExpandedCoefficients<'_>> {
        let bmax = (0..self.grid.ny)
            .flat_map(|j| (0..self.grid.nx).map(move |i| (i, j)))
            .map(|(i, j)| self.b(self.grid.coord(i, j)).abs())
            .fold(0.0, f64::max);
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let p = self.grid.coord(i, j);
                if !(self.b(p) > 1e-14 * bmax) {
                    return Err(Error::Degenerate(format!(
                        "bending stiffness {:e} at node ({i}, {j}) is below 1e-14 * max B",
                        self.b(p)
                    )));
                }
            }
        }
        Ok(ExpandedCoefficients { pc: self })
    }
}

/// The isotropic plate tensor `c_ijlk = B(1-ν)δ_il δ_jk + Bν δ_ij δ_lk`.
#[derive(Debug, Clone, Copy)]
pub struct StiffnessTensor<'a> {
    pc: &'a PlateConstants,
}

impl StiffnessTensor<'_> {
    /// Components for indices in `{0, 1}`.
    pub fn c(&self, p: [f64; 2], i: usize, j: usize, l: usize, k: usize) -> f64 {
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let b = self.pc.b(p);
        let nu = self.pc.nu(p);
        b * (1.0 - nu) * delta(i, l) * delta(j, k) + b * nu * delta(i, j) * delta(l, k)
    }

    /// All sixteen components at `p`, with `c_ijlk = c_lkij` asserted.
    pub fn components(&self, p: [f64; 2]) -> [[[[f64; 2]; 2]; 2]; 2] {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for k in 0..2 {
                        c[i][j][l][k] = self.c(p, i, j, l, k);
                    }
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for k in 0..2 {
                        assert_eq!(c[i][j][l][k], c[l][k][i][j], "major symmetry");
                    }
                }
            }
        }
        c
    }

    /// Bending moment `M_ij = c_ijlk ∂²_lk u` for Hessian `[u11, u12, u22]`.
    pub fn moment(&self, p: [f64; 2], hess: [f64; 3]) -> [[f64; 2]; 2] {
        let c = self.components(p);
        let h = [[hess[0], hess[1]], [hess[1], hess[2]]];
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    for k in 0..2 {
                        m[i][j] += c[i][j][l][k] * h[l][k];
                    }
                }
            }
        }
        m
    }
}

/// Coefficients of `L(u) = B(Δ²u + ã·∇Δu + q̃₂(u))`.
///
/// The second-order part is `q̃₂(u) = c20 u11 + c11 u12 + c02 u22` with
/// `c20 = (∂²₁₁D + Δ(νB))/B`, `c11 = 2∂²₁₂D/B`, `c02 = (∂²₂₂D + Δ(νB))/B`
/// and `D = B(1-ν)`, which is what expanding `∂²_ij(c_ijlk ∂²_lk u)` gives.
#[derive(Debug, Clone, Copy)]
pub struct ExpandedCoefficients<'a> {
    pc: &'a PlateConstants,
}

impl ExpandedCoefficients<'_> {
    fn fd_gradient(&self, f: impl Fn([f64; 2]) -> f64, p: [f64; 2]) -> [f64; 2] {
        expr::gradient(f, p, COEFF_FD_STEP)
    }

    pub fn a_tilde(&self, p: [f64; 2]) -> [f64; 2] {
        let g = self.fd_gradient(|q| self.pc.b(q), p);
        let b = self.pc.b(p);
        [2.0 * g[0] / b, 2.0 * g[1] / b]
    }

    /// `[c20, c11, c02]`.
    pub fn q2_tilde(&self, p: [f64; 2]) -> [f64; 3] {
        let h = COEFF_FD_STEP;
        let d = expr::hessian(|q| self.pc.d(q), p, h);
        let bn = expr::hessian(|q| self.pc.bnu(q), p, h);
        let lap_bn = bn[0] + bn[2];
        let b = self.pc.b(p);
        [(d[0] + lap_bn) / b, 2.0 * d[1] / b, (d[2] + lap_bn) / b]
    }

    /// Applies `q̃₂` given the Hessian `[u11, u12, u22]`.
    pub fn apply_q2(&self, p: [f64; 2], hess: [f64; 3]) -> f64 {
        let c = self.q2_tilde(p);
        c[0] * hess[0] + c[1] * hess[1] + c[2] * hess[2]
    }

    /// Measured bound `L`: the largest of `|ã|`, `|∇ã|` and `|c_α|` over
    /// the grid. Finite whenever the fields are smooth.
    pub fn measured_bound(&self) -> f64 {
        let g = self.pc.grid;
        let mut l = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.coord(i, j);
                let a = self.a_tilde(p);
                let da0 = self.fd_gradient(|q| self.a_tilde(q)[0], p);
                let da1 = self.fd_gradient(|q| self.a_tilde(q)[1], p);
                l = l
                    .max(a[0].hypot(a[1]))
                    .max((da0[0].powi(2) + da0[1].powi(2) + da1[0].powi(2) + da1[1].powi(2)).sqrt());
                for c in self.q2_tilde(p) {
                    l = l.max(c.abs());
                }
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> GridSpec {
        GridSpec::new(n, n, (-1.0, 1.0), (0.0, 2.0)).unwrap()
    }

    #[test]
    fn constant_examples() {
        let g = square(5);
        let pc = LameField::constant(1.0, 1.0, 1.0, 0.5, 1.0)
            .derive_plate_constants(&g, None)
            .unwrap();
        let p = [0.1, 0.2];
        assert!((pc.nu(p) - 0.25).abs() < 1e-15);
        assert!((pc.e(p) - 2.5).abs() < 1e-15);
        assert!((pc.b(p) - 2.0 / 9.0).abs() < 1e-15);

        let pc = LameField::constant(0.0, 1.0, 1.0, 0.5, 1.0)
            .derive_plate_constants(&g, None)
            .unwrap();
        assert_eq!(pc.nu(p), 0.0);
        assert!((pc.e(p) - 2.0).abs() < 1e-15);
        assert!((pc.b(p) - 1.0 / 6.0).abs() < 1e-15);

        let pc = LameField::constant(1.0, 2.0, 0.1, 0.5, 1.0)
            .derive_plate_constants(&g, None)
            .unwrap();
        // (0.001 / 3) * (2 * 3) / (2 * 2 + 1)
        assert!((pc.b(p) / 4e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convexity_diagnostics() {
        let g = square(6);
        let r = LameField::constant(1.0, 1.0, 1.0, 0.5, 1.0).check_strong_convexity(&g, None);
        assert!(r.passed());
        let (m1, m2) = r.margins();
        assert!((m1 - 0.5).abs() < 1e-15 && (m2 - 4.0).abs() < 1e-15);

        let r = LameField::constant(1.0, 0.1, 1.0, 0.5, 1.0).check_strong_convexity(&g, None);
        assert!(!r.mu_bound.passed);
        assert!(r.gamma_bound.passed);

        let r = LameField::constant(-0.5, 1.0, 1.0, 0.5, 0.4).check_strong_convexity(&g, None);
        assert!(r.passed());
        assert!((r.sum_bound.margin - 0.3).abs() < 1e-15);
    }

    #[test]
    fn violation_names_node_and_inequality() {
        let g = square(9);
        let mut lame = LameField::constant(1.0, 1.0, 1.0, 0.5, 1.0);
        lame.mu = Func2::parse("1 - x1").unwrap();
        match lame.derive_plate_constants(&g, None) {
            Err(Error::Convexity { i, inequality, .. }) => {
                assert_eq!(i, 8);
                assert_eq!(inequality, "mu >= alpha0");
            }
            other => panic!("expected convexity error, got {other:?}"),
        }
    }

    #[test]
    fn tensor_components() {
        let g = square(4);
        let pc = LameField::constant(1.0, 1.0, 1.0, 0.5, 1.0)
            .derive_plate_constants(&g, None)
            .unwrap();
        let c = pc.tensor().components([0.0, 1.0]);
        assert!((c[0][0][0][0] - 2.0 / 9.0).abs() < 1e-15);
        assert!((c[0][0][1][1] - 1.0 / 18.0).abs() < 1e-15);
        assert!((c[0][1][0][1] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c[0][1][1][0], 0.0);
    }

    #[test]
    fn expanded_coefficients_of_simple_fields() {
        let g = square(5);
        let pc = LameField::constant(1.0, 1.0, 1.0, 0.5, 1.0)
            .derive_plate_constants(&g, None)
            .unwrap();
        let ex = pc.expanded().unwrap();
        let p = [0.3, 0.7];
        assert!(ex.a_tilde(p)[0].abs() < 1e-12 && ex.a_tilde(p)[1].abs() < 1e-12);
        assert!(ex.q2_tilde(p).iter().all(|c| c.abs() < 1e-9));

        // λ = 0 gives ν = 0 and B = h³μ/6, so μ = 6e^{x1} with h = 1 is B = e^{x1}.
        let lame = LameField {
            lambda: Func2::constant(0.0),
            mu: Func2::parse("6*exp(x1)").unwrap(),
            h: 1.0,
            alpha0: 0.5,
            gamma0: 1.0,
            lambda0: f64::INFINITY,
        };
        let pc = lame.derive_plate_constants(&g, None).unwrap();
        let ex = pc.expanded().unwrap();
        let a = ex.a_tilde(p);
        assert!((a[0] - 2.0).abs() < 1e-9 && a[1].abs() < 1e-9);
        // Here D = B and νB = 0, so q̃₂ = (∂²₁₁B/B) u11 = u11.
        let q = ex.q2_tilde(p);
        assert!((q[0] - 1.0).abs() < 1e-6 && q[1].abs() < 1e-6 && q[2].abs() < 1e-6);
    }
}

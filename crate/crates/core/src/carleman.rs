//! The Carleman weight `ρ = φ(|x|)`, `φ(s) = s/(1+√s)²`, and numerical
//! evaluation of both sides of the weighted estimate for the bilaplacian
//! on compactly supported test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::grid::{GridField, GridSpec};
use crate::reflect::bilaplacian;

/// Stencil accuracy for `DᵏU` and `Δ²U`.
pub const ACCURACY: usize = 6;

pub fn phi(s: f64) -> f64 {
    s / (1.0 + s.sqrt()).powi(2)
}

/// `ln φ(s)`, evaluated without forming the quotient.
pub fn ln_phi(s: f64) -> f64 {
    s.ln() - 2.0 * s.sqrt().ln_1p()
}

pub fn weight(x: f64, y: f64) -> f64 {
    phi(x.hypot(y))
}

/// Shape of a test function's angular factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Identically zero.
    Zero,
    /// Purely radial bump.
    Bump,
    /// Radial bump times `1 + Σ_{m≤3} (a_m cos mθ + b_m sin mθ)` with seeded
    /// coefficients in `[-0.3, 0.3]`.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub r_in: f64,
    pub r_out: f64,
    pub profile: Profile,
    pub seed: u64,
}

impl TestFunctionSpec {
    pub fn id(&self) -> String {
        let p = match self.profile {
            Profile::Zero => "zero",
            Profile::Bump => "bump",
            Profile::Harmonic => "harmonic",
        };
        format!("{p}-{:.3}-{:.3}-{}", self.r_in, self.r_out, self.seed)
    }
}

/// Smooth step profile `exp(-1/(t(1-t)))` on `(0, 1)`, normalised to 1 at
/// the midpoint and zero outside.
fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (t * (1.0 - t))).exp()
    }
}

/// Samples the test function on `grid`. It vanishes identically outside the
/// open annulus `r_in < |x| < r_out`.
pub fn make_test_function(spec: &TestFunctionSpec, grid: GridSpec) -> Result<GridField> {
    if !(spec.r_in > 0.0 && spec.r_in < spec.r_out && spec.r_out < 1.0) {
        return Err(Error::Parameter(format!(
            "test function annulus needs 0 < r_in < r_out < 1, got ({}, {})",
            spec.r_in, spec.r_out
        )));
    }
    if spec.profile == Profile::Zero {
        return Ok(GridField::zeros(grid));
    }
    let mut coeffs = [[0.0; 2]; 3];
    if spec.profile == Profile::Harmonic {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for c in coeffs.iter_mut() {
            c[0] = rng.gen_range(-0.3..0.3);
            c[1] = rng.gen_range(-0.3..0.3);
        }
    }
    let width = spec.r_out - spec.r_in;
    Ok(GridField::from_fn(grid, |p| {
        let r = p[0].hypot(p[1]);
        let radial = bump((r - spec.r_in) / width);
        if radial == 0.0 {
            return 0.0;
        }
        let theta = p[1].atan2(p[0]);
        let angular: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let k = (m + 1) as f64;
                c[0] * (k * theta).cos() + c[1] * (k * theta).sin()
            })
            .sum();
        radial * (1.0 + angular)
    }))
}

/// A seeded family of harmonic test functions with annuli drawn inside
/// `(r_min, r_max)`, each at least half of that range wide.
pub fn family(count: usize, seed: u64, r_min: f64, r_max: f64) -> Result<Vec<TestFunctionSpec>> {
    if !(r_min > 0.0 && r_min < r_max && r_max < 1.0) {
        return Err(Error::Parameter(format!("family range needs 0 < r_min < r_max < 1, got ({r_min}, {r_max})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = r_max - r_min;
    Ok((0..count)
        .map(|_| {
            let r_in = r_min + rng.gen_range(0.0..span / 4.0);
            let r_out = r_max - rng.gen_range(0.0..span / 4.0);
            TestFunctionSpec {
                r_in,
                r_out,
                profile: Profile::Harmonic,
                seed: rng.gen(),
            }
        })
        .collect())
}

/// `ln Σ exp(x)` with a shift by the maximum and Neumaier-compensated
/// summation. Returns `-∞` for an empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = (x - m).exp();
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    m + (sum + comp).ln()
}

/// The integrands of the estimate for one test function, restricted to
/// nodes where at least one of them is nonzero.
#[derive(Debug, Clone)]
pub struct CarlemanIntegrals {
    pub grid: GridSpec,
    ln_rho: Vec<f64>,
    /// `ln(|DᵏU|² h²)` for `k = 0..=3`, then `ln((Δ²U)² h²)`.
    ln_terms: [Vec<f64>; 5],
    /// Smallest and largest node radius where `U` is nonzero.
    pub inner_radius: f64,
    pub outer_radius: f64,
}

/// `C(k, j)`, the multiplicity of `∂^{k-j}_1 ∂^j_2` in the full tensor
/// norm `|DᵏU|² = Σ_j C(k, j) (∂^{k-j}_1 ∂^j_2 U)²`.
fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

impl CarlemanIntegrals {
    pub fn new(u: &GridField) -> Self {
        let g = u.grid;
        let stack = fd::derivative_stack(u, 3, ACCURACY);
        let bil = bilaplacian(u, ACCURACY);
        let cell = (g.hx() * g.hy()).ln();
        let mut ln_rho = Vec::new();
        let mut ln_terms: [Vec<f64>; 5] = Default::default();
        let mut inner = f64::INFINITY;
        let mut outer = 0.0f64;
        for n in 0..g.len() {
            let sq: Vec<f64> = (0..=3)
                .map(|k| (0..=k).map(|j| binomial(k, j) * stack[k][j].values[n].powi(2)).sum())
                .chain(std::iter::once(bil.values[n].powi(2)))
                .collect();
            if sq.iter().all(|&v| v == 0.0) {
                continue;
            }
            let (i, j) = (n % g.nx, n / g.nx);
            let p = g.coord(i, j);
            let s = p[0].hypot(p[1]);
            if u.values[n] != 0.0 {
                inner = inner.min(s);
                outer = outer.max(s);
            }
            ln_rho.push(if s > 0.0 { ln_phi(s) } else { f64::NEG_INFINITY });
            for (t, v) in ln_terms.iter_mut().zip(sq) {
                t.push(v.ln() + cell);
            }
        }
        Self {
            grid: g,
            ln_rho,
            ln_terms,
            inner_radius: inner,
            outer_radius: outer,
        }
    }

    /// `ln ∫ ρ^e F_k`, where a zero integrand contributes nothing.
    fn ln_integral(&self, k: usize, e: f64) -> f64 {
        let xs: Vec<f64> = self.ln_terms[k]
            .iter()
            .zip(&self.ln_rho)
            .filter(|(t, _)| **t > f64::NEG_INFINITY)
            .map(|(t, r)| t + e * r)
            .collect();
        log_sum_exp(&xs)
    }

    /// Both sides of the estimate at `(tau, r)`. Errors when `U` does not
    /// vanish on `B̄_{r/4}`.
    pub fn cell(&self, tau: f64, r: f64) -> Result<CarlemanCell> {
        if !(tau >= 1.0) || !(r > 0.0 && r < 1.0) {
            return Err(Error::Parameter(format!("estimate needs tau >= 1 and 0 < r < 1, got tau = {tau}, r = {r}")));
        }
        if self.inner_radius <= r / 4.0 || self.outer_radius >= 1.0 {
            return Err(Error::Parameter(format!(
                "test function support [{:.4}, {:.4}] is not inside B_1 minus B_{:.4}",
                self.inner_radius,
                self.outer_radius,
                r / 4.0
            )));
        }
        let lt = tau.ln();
        let ln_g1 = 4.0 * lt + 2.0 * r.ln() + self.ln_integral(0, -2.0 - 2.0 * tau);
        let parts: Vec<f64> = (0..=3)
            .map(|k| (6.0 - 2.0 * k as f64) * lt + self.ln_integral(k, 2.0 * k as f64 + 1.0 - 2.0 * tau))
            .collect();
        let ln_g2 = log_sum_exp(&parts);
        let ln_rhs = self.ln_integral(4, 8.0 - 2.0 * tau);
        Ok(CarlemanCell::from_logs(tau, r, ln_g1, ln_g2, ln_rhs))
    }
}

/// One `(τ, r)` evaluation. Values are kept in log form; the linear ones are
/// `exp` of those and may be infinite when they leave the `f64` range.
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanCell {
    pub tau: f64,
    pub r: f64,
    pub ln_lhs_group1: f64,
    pub ln_lhs_group2: f64,
    pub ln_rhs: f64,
    pub lhs_group1: f64,
    pub lhs_group2: f64,
    pub rhs: f64,
    /// `None` when the right side vanishes.
    pub ratio: Option<f64>,
    /// Set when a log value came out NaN or the ratio is not finite.
    pub flagged: bool,
}

impl CarlemanCell {
    fn from_logs(tau: f64, r: f64, g1: f64, g2: f64, rhs: f64) -> Self {
        let ln_lhs = log_sum_exp(&[g1, g2]);
        let ratio = (rhs > f64::NEG_INFINITY).then(|| (ln_lhs - rhs).exp());
        let flagged = [g1, g2, rhs].iter().any(|v| v.is_nan()) || ratio.is_some_and(|q| !q.is_finite());
        Self {
            tau,
            r,
            ln_lhs_group1: g1,
            ln_lhs_group2: g2,
            ln_rhs: rhs,
            lhs_group1: g1.exp(),
            lhs_group2: g2.exp(),
            rhs: rhs.exp(),
            ratio,
            flagged,
        }
    }

    pub fn lhs(&self) -> f64 {
        self.lhs_group1 + self.lhs_group2
    }
}

pub fn evaluate_estimate(u: &GridField, tau: f64, r: f64) -> Result<CarlemanCell> {
    CarlemanIntegrals::new(u).cell(tau, r)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub function: String,
    #[serde(flatten)]
    pub cell: CarlemanCell,
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlemanSweep {
    pub rows: Vec<SweepRow>,
    /// Largest ratio over all cells: a lower bound for any constant for
    /// which the estimate holds on this family.
    pub c_emp: Option<f64>,
    pub argmax: Option<usize>,
    /// `(τ, max ratio over functions and r)`, for judging where the ratio
    /// settles.
    pub max_ratio_by_tau: Vec<(f64, f64)>,
}

/// Evaluates every `(U, τ, r)` cell on a square grid over `[-1, 1]²` with
/// `n` nodes per side.
pub fn sweep(family: &[TestFunctionSpec], taus: &[f64], rs: &[f64], n: usize) -> Result<CarlemanSweep> {
    if family.is_empty() {
        return Err(Error::Parameter("sweep needs at least one test function".into()));
    }
    let grid = GridSpec::new(n, n, (-1.0, 1.0), (-1.0, 1.0))?;
    let mut rows = Vec::new();
    for spec in family {
        let u = make_test_function(spec, grid)?;
        let ints = CarlemanIntegrals::new(&u);
        for &tau in taus {
            for &r in rs {
                let cell = if spec.profile == Profile::Zero {
                    CarlemanCell::from_logs(tau, r, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY)
                } else {
                    ints.cell(tau, r)?
                };
                rows.push(SweepRow { function: spec.id(), cell });
            }
        }
    }
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<SweepRow>) -> CarlemanSweep {
    let mut c_emp: Option<f64> = None;
    let mut argmax = None;
    let mut by_tau: Vec<(f64, f64)> = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let Some(q) = row.cell.ratio.filter(|q| q.is_finite()) else {
            continue;
        };
        if c_emp.map_or(true, |c| q > c) {
            c_emp = Some(q);
            argmax = Some(k);
        }
        match by_tau.iter_mut().find(|(t, _)| *t == row.cell.tau) {
            Some(e) => e.1 = e.1.max(q),
            None => by_tau.push((row.cell.tau, q)),
        }
    }
    CarlemanSweep {
        rows,
        c_emp,
        argmax,
        max_ratio_by_tau: by_tau,
    }
}

impl CarlemanSweep {
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "function,tau,r,lhs_group1,lhs_group2,rhs,ratio")?;
        for row in &self.rows {
            let c = &row.cell;
            let ratio = c.ratio.map_or("nan".to_string(), |q| format!("{q:.17e}"));
            writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},{}",
                row.function, c.tau, c.r, c.lhs_group1, c.lhs_group2, c.rhs, ratio
            )?;
        }
        Ok(())
    }
}

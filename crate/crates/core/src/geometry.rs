//! Boundary profiles, the local domain `Ω_{r0}` and quadrature of squared
//! fields over discs, half-discs and rectangles intersected with it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{derivative1, Func1};
use crate::grid::{GridField, GridSpec};

/// The graph `x2 = g(x1)` describing the boundary near the origin, with the
/// chart radius `r0`, shape constant `M0` and Hölder exponent `alpha`.
#[derive(Debug, Clone)]
pub struct BoundaryProfile {
    pub g: Func1,
    pub r0: f64,
    pub m0: f64,
    pub alpha: f64,
}

/// Finite-difference estimate of the `C^{4,α}` norm of a profile.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileNorm {
    /// `r0^i sup|g^(i)|` for `i = 0..=4`.
    pub terms: [f64; 5],
    /// Hölder quotient of `g''''`, the larger of the two sampled scales.
    pub holder: f64,
    pub total: f64,
    pub bound: f64,
    pub g_at_origin: f64,
    pub slope_at_origin: f64,
}

impl ProfileNorm {
    pub fn origin_ok(&self) -> bool {
        self.g_at_origin.abs() <= 1e-10 && self.slope_at_origin.abs() <= 1e-10
    }

    pub fn norm_ok(&self) -> bool {
        self.total <= self.bound
    }
}

const PROFILE_SAMPLES: usize = 257;

impl BoundaryProfile {
    /// Builds a profile after checking `g(0) = g'(0) = 0` and the norm bound.
    pub fn new(g: Func1, r0: f64, m0: f64, alpha: f64) -> Result<Self> {
        let p = Self::unchecked(g, r0, m0, alpha)?;
        let norm = p.norm_surrogate();
        if !norm.origin_ok() {
            return Err(Error::Profile(format!(
                "need g(0) = g'(0) = 0, got g(0) = {:e}, g'(0) = {:e}",
                norm.g_at_origin, norm.slope_at_origin
            )));
        }
        if !norm.norm_ok() {
            return Err(Error::Profile(format!(
                "C^(4,alpha) norm estimate {:.6} exceeds M0 r0 = {:.6}",
                norm.total, norm.bound
            )));
        }
        Ok(p)
    }

    /// Builds a profile checking only the scalar parameters.
    pub fn unchecked(g: Func1, r0: f64, m0: f64, alpha: f64) -> Result<Self> {
        if !(r0 > 0.0) || !(m0 > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Validation(format!(
                "profile needs r0 > 0, M0 > 0, 0 < alpha < 1 (got {r0}, {m0}, {alpha})"
            )));
        }
        Ok(Self { g, r0, m0, alpha })
    }

    pub fn flat(r0: f64, m0: f64) -> Self {
        Self {
            g: Func1::constant(0.0),
            r0,
            m0,
            alpha: 0.5,
        }
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        self.g.eval(x)
    }

    /// Derivative of order `0..=4` by central differences scaled to `r0`.
    pub fn dg(&self, x: f64, order: usize) -> f64 {
        let h = match order {
            0..=2 => 1e-3,
            _ => 1e-2,
        } * self.r0;
        derivative1(&self.g, x, order, h)
    }

    /// Half-height of the chart rectangle, `2 M0 r0`.
    pub fn height(&self) -> f64 {
        2.0 * self.m0 * self.r0
    }

    pub fn norm_surrogate(&self) -> ProfileNorm {
        let n = PROFILE_SAMPLES;
        let hs = 2.0 * self.r0 / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|k| -self.r0 + k as f64 * hs).collect();
        let mut terms = [0.0; 5];
        let mut d4 = Vec::with_capacity(n);
        for &x in &xs {
            for (i, t) in terms.iter_mut().enumerate() {
                let v = self.dg(x, i);
                *t = f64::max(*t, self.r0.powi(i as i32) * v.abs());
                if i == 4 {
                    d4.push(v);
                }
            }
        }
        let quotient = |step: usize| {
            let dist = (step as f64 * hs).powf(self.alpha);
            (0..n - step)
                .map(|k| (d4[k + step] - d4[k]).abs() / dist)
                .fold(0.0, f64::max)
        };
        let coarse = ((n - 1) / 16).max(1);
        let holder = quotient(1).max(quotient(coarse));
        let total = terms.iter().sum::<f64>() + self.r0.powf(4.0 + self.alpha) * holder;
        ProfileNorm {
            terms,
            holder,
            total,
            bound: self.m0 * self.r0,
            g_at_origin: self.g(0.0),
            slope_at_origin: self.dg(0.0, 1),
        }
    }

    /// `sup |g''|` on `[-r0, r0]`, sampled.
    pub fn curvature_bound(&self) -> f64 {
        let n = PROFILE_SAMPLES;
        (0..n)
            .map(|k| -self.r0 + 2.0 * self.r0 * k as f64 / (n - 1) as f64)
            .map(|x| self.dg(x, 2).abs())
            .fold(0.0, f64::max)
    }
}

/// The domain `Ω_{r0} = {x ∈ R_{r0, 2M0r0} : x2 > g(x1)}` on a structured grid.
#[derive(Debug, Clone)]
pub struct DomainChart {
    pub profile: BoundaryProfile,
    pub grid: GridSpec,
    /// Interior indicator per node.
    pub mask: Vec<bool>,
    /// Samples of `Γ_{r0}` at the grid abscissae.
    pub boundary: Vec<[f64; 2]>,
    pub area: f64,
}

impl DomainChart {
    /// Builds the chart, rejecting profiles that violate `g(0) = g'(0) = 0`.
    pub fn build(profile: &BoundaryProfile, nx: usize, ny: usize) -> Result<Self> {
        let norm = profile.norm_surrogate();
        if !norm.origin_ok() {
            return Err(Error::Profile(format!(
                "need g(0) = g'(0) = 0, got g(0) = {:e}, g'(0) = {:e}",
                norm.g_at_origin, norm.slope_at_origin
            )));
        }
        Self::build_unchecked(profile, nx, ny)
    }

    /// Builds the chart without the origin check, for profiles used only to
    /// exercise the quadrature.
    pub fn build_unchecked(profile: &BoundaryProfile, nx: usize, ny: usize) -> Result<Self> {
        if nx < 16 || ny < 16 {
            return Err(Error::Validation(format!("resolution {nx}x{ny} is below 16 nodes per axis")));
        }
        let r0 = profile.r0;
        let hgt = profile.height();
        let grid = GridSpec::new(nx, ny, (-r0, r0), (-hgt, hgt))?;
        let mut mask = vec![false; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let [x1, x2] = grid.coord(i, j);
                mask[grid.index(i, j)] = x2 > profile.g(x1) && x1.abs() < r0 && x2.abs() < hgt;
            }
        }
        let boundary = (0..nx)
            .map(|i| {
                let x = grid.xi(i);
                [x, profile.g(x)]
            })
            .collect();
        let mut chart = Self {
            profile: profile.clone(),
            grid,
            mask,
            boundary,
            area: 0.0,
        };
        let one = GridField::from_fn(grid, |_| 1.0);
        chart.area = mass(&one, &Region::omega(profile)).value;
        Ok(chart)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        Region::omega(&self.profile).contains(p)
    }
}

/// Basic shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Shape {
    Disc { center: [f64; 2], radius: f64 },
    /// Upper (`x2 > center.x2`) or lower half of a disc.
    HalfDisc { center: [f64; 2], radius: f64, upper: bool },
    Rectangle { x: (f64, f64), y: (f64, f64) },
    /// The whole plane; combined with a profile this is `Ω_{r0}` itself.
    Plane,
}

/// A shape, optionally intersected with `Ω_{r0}` of a profile.
#[derive(Debug, Clone)]
pub struct Region {
    pub shape: Shape,
    pub omega: Option<BoundaryProfile>,
}

impl Region {
    pub fn disc(center: [f64; 2], radius: f64) -> Self {
        Self {
            shape: Shape::Disc { center, radius },
            omega: None,
        }
    }

    pub fn half_disc(center: [f64; 2], radius: f64, upper: bool) -> Self {
        Self {
            shape: Shape::HalfDisc { center, radius, upper },
            omega: None,
        }
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            shape: Shape::Rectangle { x, y },
            omega: None,
        }
    }

    pub fn omega(profile: &BoundaryProfile) -> Self {
        Self {
            shape: Shape::Plane,
            omega: Some(profile.clone()),
        }
    }

    pub fn within(mut self, profile: &BoundaryProfile) -> Self {
        self.omega = Some(profile.clone());
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.shape {
            Shape::Disc { radius, .. } | Shape::HalfDisc { radius, .. } if !(radius > 0.0) => {
                Err(Error::Validation(format!("region radius must be positive, got {radius}")))
            }
            Shape::Rectangle { x, y } if !(x.1 > x.0 && y.1 > y.0) => {
                Err(Error::Validation("rectangle must have positive extent".into()))
            }
            _ => Ok(()),
        }
    }

    fn constraints(&self) -> Vec<Constraint> {
        let mut cs = Vec::new();
        match self.shape {
            Shape::Disc { center, radius } => cs.push(Constraint::Disc { center, radius }),
            Shape::HalfDisc { center, radius, upper } => {
                cs.push(Constraint::Disc { center, radius });
                let s = if upper { -1.0 } else { 1.0 };
                // s * (x2 - c2) <= 0
                cs.push(Constraint::HalfPlane {
                    n: [0.0, s],
                    offset: s * center[1],
                });
            }
            Shape::Rectangle { x, y } => push_box(&mut cs, x, y),
            Shape::Plane => {}
        }
        if let Some(p) = &self.omega {
            push_box(&mut cs, (-p.r0, p.r0), (-p.height(), p.height()));
            cs.push(Constraint::Graph {
                profile: p.clone(),
                curvature: p.curvature_bound(),
            });
        }
        cs
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.constraints().iter().all(|c| c.linearize(p).0 <= 0.0)
    }

    fn bbox(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut lo = [f64::NEG_INFINITY; 2];
        let mut hi = [f64::INFINITY; 2];
        let mut clamp = |a: [f64; 2], b: [f64; 2]| {
            lo = [lo[0].max(a[0]), lo[1].max(a[1])];
            hi = [hi[0].min(b[0]), hi[1].min(b[1])];
        };
        match self.shape {
            Shape::Disc { center: c, radius: r } => clamp([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]),
            Shape::HalfDisc { center: c, radius: r, upper } => {
                if upper {
                    clamp([c[0] - r, c[1]], [c[0] + r, c[1] + r])
                } else {
                    clamp([c[0] - r, c[1] - r], [c[0] + r, c[1]])
                }
            }
            Shape::Rectangle { x, y } => clamp([x.0, y.0], [x.1, y.1]),
            Shape::Plane => {}
        }
        if let Some(p) = &self.omega {
            clamp([-p.r0, -p.height()], [p.r0, p.height()]);
        }
        (lo[0] < hi[0] && lo[1] < hi[1]).then_some((lo, hi))
    }
}

fn push_box(cs: &mut Vec<Constraint>, x: (f64, f64), y: (f64, f64)) {
    cs.push(Constraint::HalfPlane { n: [-1.0, 0.0], offset: -x.0 });
    cs.push(Constraint::HalfPlane { n: [1.0, 0.0], offset: x.1 });
    cs.push(Constraint::HalfPlane { n: [0.0, -1.0], offset: -y.0 });
    cs.push(Constraint::HalfPlane { n: [0.0, 1.0], offset: y.1 });
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    In,
    Out,
    Cut,
}

/// A region `{φ <= 0}`.
#[derive(Debug, Clone)]
enum Constraint {
    Disc { center: [f64; 2], radius: f64 },
    /// `n·p - offset <= 0`.
    HalfPlane { n: [f64; 2], offset: f64 },
    /// `g(x1) - x2 <= 0`.
    Graph { profile: BoundaryProfile, curvature: f64 },
}

impl Constraint {
    /// Classifies the box `[lo, hi]`.
    fn classify(&self, lo: [f64; 2], hi: [f64; 2]) -> Side {
        match self {
            Constraint::Disc { center, radius } => {
                let near = |c: f64, a: f64, b: f64| c.clamp(a, b) - c;
                let far = |c: f64, a: f64, b: f64| (a - c).abs().max((b - c).abs());
                let dmin = near(center[0], lo[0], hi[0]).hypot(near(center[1], lo[1], hi[1]));
                let dmax = far(center[0], lo[0], hi[0]).hypot(far(center[1], lo[1], hi[1]));
                if dmax <= *radius {
                    Side::In
                } else if dmin >= *radius {
                    Side::Out
                } else {
                    Side::Cut
                }
            }
            Constraint::HalfPlane { n, offset } => {
                let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
                let v = n[0] * c[0] + n[1] * c[1] - offset;
                let spread = n[0].abs() * (hi[0] - lo[0]) / 2.0 + n[1].abs() * (hi[1] - lo[1]) / 2.0;
                if v + spread <= 0.0 {
                    Side::In
                } else if v - spread >= 0.0 {
                    Side::Out
                } else {
                    Side::Cut
                }
            }
            Constraint::Graph { profile, curvature } => {
                let cx = (lo[0] + hi[0]) / 2.0;
                let hx = (hi[0] - lo[0]) / 2.0;
                let g = profile.g(cx);
                let spread = profile.dg(cx, 1).abs() * hx + 0.5 * curvature * hx * hx;
                if lo[1] >= g + spread {
                    Side::In
                } else if hi[1] <= g - spread {
                    Side::Out
                } else {
                    Side::Cut
                }
            }
        }
    }

    /// Value and gradient of `φ` at `p`.
    fn linearize(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        match self {
            Constraint::Disc { center, radius } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let r = d[0].hypot(d[1]);
                if r == 0.0 {
                    (-radius, [0.0, 0.0])
                } else {
                    (r - radius, [d[0] / r, d[1] / r])
                }
            }
            Constraint::HalfPlane { n, offset } => (n[0] * p[0] + n[1] * p[1] - offset, *n),
            Constraint::Graph { profile, .. } => (profile.g(p[0]) - p[1], [profile.dg(p[0], 1), -1.0]),
        }
    }
}

/// Result of a mass quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mass {
    pub value: f64,
    /// Set when the region does not meet the grid.
    pub empty: bool,
}

const CUT_SUBDIVISION: usize = 8;
const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// `∫_region |field|²` with the field bilinear on each grid cell. Cells
/// inside the region use 2×2 Gauss points (exact for the bilinear square);
/// cells crossing its boundary are split 8×8, and split cells still crossing
/// are clipped against the linearized boundary.
pub fn mass(field: &GridField, region: &Region) -> Mass {
    let Some((lo, hi)) = region.bbox() else {
        return Mass { value: 0.0, empty: true };
    };
    let g = field.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let i0 = (((lo[0] - g.x.0) / hx).floor().max(0.0)) as usize;
    let j0 = (((lo[1] - g.y.0) / hy).floor().max(0.0)) as usize;
    let i1 = ((((hi[0] - g.x.0) / hx).ceil()) as isize).clamp(0, g.nx as isize - 1) as usize;
    let j1 = ((((hi[1] - g.y.0) / hy).ceil()) as isize).clamp(0, g.ny as isize - 1) as usize;
    let constraints = region.constraints();
    let mut total = 0.0;
    let mut touched = false;
    for j in j0..j1.max(j0) {
        for i in i0..i1.max(i0) {
            let clo = [g.xi(i), g.yj(j)];
            let chi = [g.xi(i + 1), g.yj(j + 1)];
            let corners = [field.get(i, j), field.get(i + 1, j), field.get(i, j + 1), field.get(i + 1, j + 1)];
            let f = |p: [f64; 2]| {
                let s = (p[0] - clo[0]) / (chi[0] - clo[0]);
                let t = (p[1] - clo[1]) / (chi[1] - clo[1]);
                (1.0 - t) * ((1.0 - s) * corners[0] + s * corners[1]) + t * ((1.0 - s) * corners[2] + s * corners[3])
            };
            match classify_all(&constraints, clo, chi) {
                Side::Out => {}
                Side::In => {
                    touched = true;
                    total += gauss_box(&f, clo, chi);
                }
                Side::Cut => {
                    let sx = (chi[0] - clo[0]) / CUT_SUBDIVISION as f64;
                    let sy = (chi[1] - clo[1]) / CUT_SUBDIVISION as f64;
                    for b in 0..CUT_SUBDIVISION {
                        for a in 0..CUT_SUBDIVISION {
                            let slo = [clo[0] + a as f64 * sx, clo[1] + b as f64 * sy];
                            let shi = [slo[0] + sx, slo[1] + sy];
                            match classify_all(&constraints, slo, shi) {
                                Side::Out => {}
                                Side::In => {
                                    touched = true;
                                    total += gauss_box(&f, slo, shi);
                                }
                                Side::Cut => {
                                    let (area, centroid) = clip_box(&constraints, slo, shi);
                                    if area > 0.0 {
                                        touched = true;
                                        total += area * f(centroid).powi(2);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Mass {
        value: total,
        empty: !touched,
    }
}

fn classify_all(cs: &[Constraint], lo: [f64; 2], hi: [f64; 2]) -> Side {
    let mut side = Side::In;
    for c in cs {
        match c.classify(lo, hi) {
            Side::Out => return Side::Out,
            Side::Cut => side = Side::Cut,
            Side::In => {}
        }
    }
    side
}

fn gauss_box(f: &impl Fn([f64; 2]) -> f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let h = [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0];
    let mut acc = 0.0;
    for gy in GAUSS {
        for gx in GAUSS {
            acc += f([c[0] + gx * h[0], c[1] + gy * h[1]]).powi(2);
        }
    }
    acc * h[0] * h[1]
}

/// Clips a box by every cutting constraint linearized at the box center and
/// returns the area and centroid of the remaining polygon.
fn clip_box(cs: &[Constraint], lo: [f64; 2], hi: [f64; 2]) -> (f64, [f64; 2]) {
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut poly = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    for con in cs {
        if con.classify(lo, hi) != Side::Cut {
            continue;
        }
        let (v, grad) = con.linearize(c);
        let phi = |p: [f64; 2]| v + grad[0] * (p[0] - c[0]) + grad[1] * (p[1] - c[1]);
        poly = clip_polygon(&poly, phi);
        if poly.len() < 3 {
            return (0.0, c);
        }
    }
    polygon_area_centroid(&poly)
}

/// Sutherland–Hodgman clipping against `{phi <= 0}` for affine `phi`.
fn clip_polygon(poly: &[[f64; 2]], phi: impl Fn([f64; 2]) -> f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (fa, fb) = (phi(a), phi(b));
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa <= 0.0) != (fb <= 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn polygon_area_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    a *= 0.5;
    if a.abs() < 1e-300 {
        return (0.0, poly[0]);
    }
    (a.abs(), [cx / (6.0 * a), cy / (6.0 * a)])
}

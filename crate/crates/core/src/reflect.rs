//! Odd reflection of `v` across `y₂ = 0` and the extended equation
//! `Δ²v̄ = f̄` on the unit disc.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd;
use crate::flatten::{to_w, FlattenedOperator, TwistData};
use crate::grid::{GridField, GridSpec};

/// `f = Δ²v − ℒ(a v)/a = −[(4∇a/a + b)·∇Δv + p₂(v)]` on the grid of `v`.
pub fn compute_source(v: &GridField, twist: &TwistData, op: &FlattenedOperator, accuracy: usize) -> Result<GridField> {
    if v.grid != op.grid || v.grid != twist.grid {
        return Err(Error::Domain("source needs v, the twist and the operator on one grid".into()));
    }
    let bil = bilaplacian(v, accuracy);
    let lw = op.apply(&to_w(v, twist), accuracy);
    let mut f = bil;
    for (k, a) in twist.a.values.iter().enumerate() {
        f.values[k] -= lw.values[k] / a;
    }
    Ok(f)
}

pub fn bilaplacian(f: &GridField, accuracy: usize) -> GridField {
    let d40 = fd::partial(f, 4, 0, accuracy);
    let d22 = fd::partial(f, 2, 2, accuracy);
    let d04 = fd::partial(f, 0, 4, accuracy);
    let mut out = d40;
    for k in 0..out.values.len() {
        out.values[k] += 2.0 * d22.values[k] + d04.values[k];
    }
    out
}

/// The odd extension of a field given on `[x0, x1] × [0, y1]`.
#[derive(Debug, Clone)]
pub struct Reflected {
    pub field: GridField,
    /// Largest `|value|` on the midline before snapping.
    pub midline_defect: f64,
    /// Whether every midline value was snapped to zero.
    pub snapped: bool,
}

/// Odd reflection `F(y₁, −y₂) = −F(y₁, y₂)`. Midline values with magnitude
/// at most `snap` are set to exactly zero; larger ones are kept, which
/// leaves the extension non-odd there (reported through `snapped`).
pub fn odd_reflect(field: &GridField, snap: f64) -> Result<Reflected> {
    let g = field.grid;
    if g.y.0 != 0.0 {
        return Err(Error::Domain(format!("reflection needs a grid starting at y2 = 0, got {}", g.y.0)));
    }
    let ny = 2 * g.ny - 1;
    let grid = GridSpec {
        nx: g.nx,
        ny,
        x: g.x,
        y: (-g.y.1, g.y.1),
    };
    let mut out = GridField::zeros(grid);
    let mut defect = 0.0f64;
    let mut snapped = true;
    let m = g.ny - 1;
    for i in 0..g.nx {
        let v0 = field.get(i, 0);
        defect = defect.max(v0.abs());
        if v0.abs() <= snap {
            out.set(i, m, 0.0);
        } else {
            snapped = false;
            out.set(i, m, v0);
        }
        for j in 1..g.ny {
            let v = field.get(i, j);
            out.set(i, m + j, v);
            out.set(i, m - j, -v);
        }
    }
    Ok(Reflected {
        field: out,
        midline_defect: defect,
        snapped,
    })
}

/// `v̄` and `f̄` on the square grid over `[-1, 1]²`.
#[derive(Debug, Clone)]
pub struct ReflectedField {
    pub vbar: GridField,
    pub fbar: GridField,
    pub v_snapped: bool,
    pub v_midline_defect: f64,
}

/// Reflects `v` and `f`. `v` is snapped on the midline when within `snap`;
/// `f̄` takes the mean of its one-sided limits there, which is zero.
pub fn reflect_pair(v: &GridField, f: &GridField, snap: f64) -> Result<ReflectedField> {
    let rv = odd_reflect(v, snap)?;
    let rf = odd_reflect(f, f64::INFINITY)?;
    Ok(ReflectedField {
        vbar: rv.field,
        fbar: rf.field,
        v_snapped: rv.snapped,
        v_midline_defect: rv.midline_defect,
    })
}

/// Residual of `Δ²v̄ = f̄` on one annulus.
#[derive(Debug, Clone, Serialize)]
pub struct AnnulusResidual {
    pub r_in: f64,
    pub r_out: f64,
    pub l2: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    pub rho: f64,
    /// Discrete `L²` norm of `Δ²v̄ − f̄` over nodes with `|y| ≤ rho`.
    pub l2: f64,
    pub max: f64,
    pub annuli: Vec<AnnulusResidual>,
    /// Largest residual within two rows of the midline.
    pub band_max: f64,
    /// `max |v̄(·, y) + v̄(·, −y)|` over mirrored nodes.
    pub symmetry_defect: f64,
    pub jumps: JumpIndicators,
}

/// One-sided derivative jumps across `y₂ = 0` for `|y₁| ≤ rho`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpIndicators {
    pub second: f64,
    pub third: f64,
    /// Largest centered fourth difference in `y₂` on the midline rows.
    pub fourth_difference: f64,
}

pub fn jump_indicators(vbar: &GridField, rho: f64) -> JumpIndicators {
    let g = vbar.grid;
    let m = g.ny / 2;
    let h = g.hy();
    // Second-order one-sided windows of width deriv + 2.
    let w2 = crate::fd::fornberg(0.0, &[0.0, 1.0, 2.0, 3.0], 2).swap_remove(2);
    let w3 = crate::fd::fornberg(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 3).swap_remove(3);
    let w4 = crate::fd::central_weights(4, 2);
    let mut out = JumpIndicators {
        second: 0.0,
        third: 0.0,
        fourth_difference: 0.0,
    };
    for i in 0..g.nx {
        if g.xi(i).abs() > rho {
            continue;
        }
        let up = |w: &[f64]| w.iter().enumerate().map(|(k, c)| c * vbar.get(i, m + k)).sum::<f64>();
        // Mirrored window: derivative of order d picks up (-1)^d.
        let down = |w: &[f64]| w.iter().enumerate().map(|(k, c)| c * vbar.get(i, m - k)).sum::<f64>();
        let j2 = (up(&w2) - down(&w2)) / (h * h);
        let j3 = (up(&w3) + down(&w3)) / (h * h * h);
        out.second = out.second.max(j2.abs());
        out.third = out.third.max(j3.abs());
        for c in [m - 1, m, m + 1] {
            let d4: f64 = w4.iter().enumerate().map(|(k, w)| w * vbar.get(i, c + k - 2)).sum::<f64>() / h.powi(4);
            out.fourth_difference = out.fourth_difference.max(d4.abs());
        }
    }
    out
}

/// Reports `‖Δ²v̄ − f̄‖` over `B_rho`, per annulus of width `rho / bands`,
/// with the midline band and jump indicators.
pub fn verify_extension(r: &ReflectedField, rho: f64, bands: usize, accuracy: usize) -> ExtensionReport {
    let g = r.vbar.grid;
    let res = bilaplacian(&r.vbar, accuracy).zip_with(&r.fbar, |a, b| a - b);
    let cell = g.hx() * g.hy();
    let m = g.ny / 2;
    let mut annuli: Vec<AnnulusResidual> = (0..bands)
        .map(|k| AnnulusResidual {
            r_in: rho * k as f64 / bands as f64,
            r_out: rho * (k + 1) as f64 / bands as f64,
            l2: 0.0,
            max: 0.0,
        })
        .collect();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut band_max = 0.0f64;
    let mut sym = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let y = g.coord(i, j);
            let rad = y[0].hypot(y[1]);
            if j >= m {
                sym = sym.max((r.vbar.get(i, j) + r.vbar.get(i, 2 * m - j)).abs());
            }
            if rad > rho {
                continue;
            }
            let v = res.get(i, j);
            sum += v * v * cell;
            max = max.max(v.abs());
            if j.abs_diff(m) <= 2 {
                band_max = band_max.max(v.abs());
            }
            let k = ((rad / rho * bands as f64) as usize).min(bands - 1);
            annuli[k].l2 += v * v * cell;
            annuli[k].max = annuli[k].max.max(v.abs());
        }
    }
    for a in &mut annuli {
        a.l2 = a.l2.sqrt();
    }
    ExtensionReport {
        rho,
        l2: sum.sqrt(),
        max,
        annuli,
        band_max,
        symmetry_defect: sym,
        jumps: jump_indicators(&r.vbar, rho),
    }
}

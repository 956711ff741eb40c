use plate_core::conformal::build_chart;
use plate_core::expr::{Func1, Func2};
use plate_core::fd;
use plate_core::flatten::{assemble_flattened_operator, boundary_equivalence, boundary_residuals_flattened, gamma_coefficient, to_v};
use plate_core::geometry::BoundaryProfile;
use plate_core::grid::{GridField, GridSpec};
use plate_core::material::{LameField, PlateConstants};
use proptest::prelude::*;

fn varying_material() -> PlateConstants {
    let lame = LameField {
        lambda: Func2::parse("0.5 + 0.1*x2").unwrap(),
        mu: Func2::parse("1 + 0.2*x1 + 0.1*x1*x2").unwrap(),
        h: 1.0,
        alpha0: 0.5,
        gamma0: 1.0,
        lambda0: 10.0,
    };
    let g = GridSpec::new(33, 33, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
    lame.derive_plate_constants(&g, None).unwrap()
}

fn parabola() -> BoundaryProfile {
    BoundaryProfile::new(Func1::parse("0.05*x^2").unwrap(), 1.0, 1.0, 0.5).unwrap()
}

#[test]
fn flattened_operator_matches_the_physical_one() {
    // u = x1² x2 + x2³ + x1⁴: Δu = 8x2 + 12x1², ∇Δu = (24x1, 8), Δ²u = 24.
    let u = |x: [f64; 2]| x[0] * x[0] * x[1] + x[1].powi(3) + x[0].powi(4);
    let chart = build_chart(&parabola(), 33, None).unwrap();
    let mat = varying_material();
    let ex = mat.expanded().unwrap();
    let grid = GridSpec::new(81, 41, (-1.0, 1.0), (0.0, 1.0)).unwrap();
    let op = assemble_flattened_operator(&chart, &mat, grid).unwrap();
    let w = chart.pullback_on(&u, grid).unwrap();
    let lw = op.apply(&w, 4);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 4..grid.ny - 4 {
        for i in 4..grid.nx - 4 {
            let y = grid.coord(i, j);
            let [x1, x2] = chart.eval(y);
            let a = ex.a_tilde([x1, x2]);
            let hess = [2.0 * x2 + 12.0 * x1 * x1, 2.0 * x1, 6.0 * x2];
            let pu = 24.0 + a[0] * 24.0 * x1 + a[1] * 8.0 + ex.apply_q2([x1, x2], hess);
            let expected = pu * chart.map.grad_phi_sq(y).powi(2);
            worst = worst.max((lw.get(i, j) - expected).abs());
            scale = scale.max(expected.abs());
        }
    }
    assert!(worst < 1e-6 * scale, "{worst:e} vs {scale:e}");
}

#[test]
fn flat_pipeline_with_a_linear_solution_has_vanishing_residuals() {
    let chart = build_chart(&BoundaryProfile::flat(1.0, 1.0), 17, None).unwrap();
    let lame = LameField::constant(0.5, 1.0, 1.0, 0.5, 1.0);
    let mat = lame.derive_plate_constants(&GridSpec::new(9, 9, (-1.0, 1.0), (-1.0, 1.0)).unwrap(), None).unwrap();
    let grid = GridSpec::new(33, 17, (-1.0, 1.0), (0.0, 1.0)).unwrap();
    let op = assemble_flattened_operator(&chart, &mat, grid).unwrap();
    let tw = gamma_coefficient(&chart, &mat, grid);
    let w = chart.pullback_on(&|x: [f64; 2]| x[1], grid).unwrap();
    let v = to_v(&w, &tw);
    assert_eq!(v, w);
    let rep = boundary_residuals_flattened(&w, &v, &tw, &op, 4);
    for r in [rep.w_edge, rep.w_condition, rep.v_edge, rep.v_condition, rep.interior_max] {
        assert!(r <= 1e-8, "{rep:?}");
    }
}

#[test]
fn boundary_equivalence_on_a_curved_chart() {
    let chart = build_chart(&parabola(), 33, None).unwrap();
    let mat = varying_material();
    let grid = GridSpec::new(129, 65, (-1.0, 1.0), (0.0, 1.0)).unwrap();
    let tw = gamma_coefficient(&chart, &mat, grid);
    assert!(tw.gamma.iter().any(|g| g.abs() > 1e-3));
    let g = |x: f64| 0.05 * x * x;
    let w = chart.pullback_on(&|x: [f64; 2]| (x[1] - g(x[0])) * (1.0 + x[0]) * x[1].exp(), grid).unwrap();
    let rep = boundary_equivalence(&w, &tw, 4, 5.0);
    assert_eq!(rep.failures, 0, "{rep:?}");
}

/// Polynomial with coefficients `c` in the monomials of degree ≤ 3.
fn cubic(c: &[f64; 10], y: [f64; 2]) -> f64 {
    let (a, b) = (y[0], y[1]);
    let m = [1.0, a, b, a * a, a * b, b * b, a * a * a, a * a * b, a * b * b, b * b * b];
    c.iter().zip(m).map(|(c, m)| c * m).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Δ²(av) − aΔ²v − 4∇a·∇Δv equals the explicit lower-order remainder
    /// 2ΔaΔv + 4 a_ij v_ij + 4∇Δa·∇v + vΔ²a; with cubic a and v every
    /// accuracy-4 stencil involved is exact.
    #[test]
    fn product_rule_remainder(ca in prop::array::uniform10(-1.0f64..1.0), cv in prop::array::uniform10(-1.0f64..1.0)) {
        let grid = GridSpec::new(21, 21, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let a = GridField::from_fn(grid, |y| 2.0 + 0.3 * cubic(&ca, y));
        let v = GridField::from_fn(grid, |y| cubic(&cv, y));
        let av = a.zip_with(&v, |a, v| a * v);
        let acc = 4;
        let d = |f: &GridField, i: usize, j: usize| fd::partial(f, i, j, acc);
        let bil = |f: &GridField| d(f, 4, 0).zip_with(&d(f, 2, 2), |x, y| x + 2.0 * y).zip_with(&d(f, 0, 4), |x, y| x + y);
        let lap = |f: &GridField| fd::laplacian(f, acc);
        let gl = |f: &GridField| [lap(&d(f, 1, 0)), lap(&d(f, 0, 1))];
        let (bav, bv, ba) = (bil(&av), bil(&v), bil(&a));
        let (gla, glv) = (gl(&a), gl(&v));
        let (la, lv) = (lap(&a), lap(&v));
        let (a1, a2, v1, v2) = (d(&a, 1, 0), d(&a, 0, 1), d(&v, 1, 0), d(&v, 0, 1));
        let (a11, a12, a22) = (d(&a, 2, 0), d(&a, 1, 1), d(&a, 0, 2));
        let (v11, v12, v22) = (d(&v, 2, 0), d(&v, 1, 1), d(&v, 0, 2));
        for n in 0..grid.len() {
            let lhs = bav.values[n] - a.values[n] * bv.values[n]
                - 4.0 * (a1.values[n] * glv[0].values[n] + a2.values[n] * glv[1].values[n]);
            let p2 = 2.0 * la.values[n] * lv.values[n]
                + 4.0 * (a11.values[n] * v11.values[n] + 2.0 * a12.values[n] * v12.values[n] + a22.values[n] * v22.values[n])
                + 4.0 * (gla[0].values[n] * v1.values[n] + gla[1].values[n] * v2.values[n])
                + v.values[n] * ba.values[n];
            prop_assert!((lhs - p2).abs() < 1e-6, "{lhs} vs {p2}");
        }
    }
}

use plate_core::conformal::build_chart;
use plate_core::expr::Func2;
use plate_core::flatten::{assemble_flattened_operator, gamma_coefficient, to_v};
use plate_core::geometry::BoundaryProfile;
use plate_core::grid::{GridField, GridSpec};
use plate_core::material::LameField;
use plate_core::plate_solver::{solve, PlateProblem};
use plate_core::reflect::{compute_source, reflect_pair, verify_extension, ExtensionReport};

/// Solves with outer data 2·x1·x2 on the flat strip and carries the solution
/// through the flattening and reflection steps. The material varies with
/// x1·x2 so that the plate solution is not exactly representable.
fn flat_pipeline(levels: &[(usize, usize)]) -> Vec<ExtensionReport> {
    let profile = BoundaryProfile::flat(1.0, 1.0);
    let lame = LameField {
        lambda: Func2::constant(0.5),
        mu: Func2::parse("1 + 0.2*x1 + 0.1*x1*x2").unwrap(),
        h: 1.0,
        alpha0: 0.5,
        gamma0: 1.0,
        lambda0: 10.0,
    };
    let mgrid = GridSpec::new(33, 33, (-1.0, 1.0), (0.0, 2.0)).unwrap();
    let material = lame.derive_plate_constants(&mgrid, None).unwrap();
    let problem = PlateProblem {
        profile: profile.clone(),
        material: material.clone(),
        outer: Func2::parse("2*x1*x2").unwrap(),
        source: None,
    };
    let chart = build_chart(&profile, 33, None).unwrap();
    levels
        .iter()
        .map(|&(n, m)| {
            let (sol, _) = solve(&problem, n).unwrap();
            let grid = GridSpec::new(2 * m - 1, m, (-1.0, 1.0), (0.0, 1.0)).unwrap();
            let w = chart.pullback_on(&sol, grid).unwrap();
            let tw = gamma_coefficient(&chart, &material, grid);
            let v = to_v(&w, &tw);
            let op = assemble_flattened_operator(&chart, &material, grid).unwrap();
            let f = compute_source(&v, &tw, &op, 2).unwrap();
            let r = reflect_pair(&v, &f, 1e-12).unwrap();
            assert!(r.v_snapped, "midline defect {}", r.v_midline_defect);
            verify_extension(&r, 0.9, 3, 2)
        })
        .collect()
}

#[test]
fn extension_residual_decreases_under_refinement() {
    let reps = flat_pipeline(&[(65, 9), (129, 17)]);
    assert!(reps[1].l2 < 0.5 * reps[0].l2, "{:e} {:e}", reps[0].l2, reps[1].l2);
    assert!(reps[1].jumps.second < reps[0].jumps.second);
    for r in &reps {
        assert_eq!(r.symmetry_defect, 0.0);
        assert_eq!(r.annuli.len(), 3);
        let total: f64 = r.annuli.iter().map(|a| a.l2 * a.l2).sum();
        assert!((total.sqrt() - r.l2).abs() <= 1e-12 * r.l2.max(1e-300));
    }
}

#[test]
fn even_data_keeps_its_jump() {
    // y2 + y2²/2 is not odd, so its reflection has a second-derivative jump
    // of 2 at every resolution.
    let mut jumps = Vec::new();
    for m in [9, 17, 33] {
        let grid = GridSpec::new(2 * m - 1, m, (-1.0, 1.0), (0.0, 1.0)).unwrap();
        let v = GridField::from_fn(grid, |y| y[1] + 0.5 * y[1] * y[1]);
        let r = reflect_pair(&v, &GridField::zeros(grid), 1e-12).unwrap();
        jumps.push(verify_extension(&r, 0.9, 3, 2).jumps.second);
    }
    for j in &jumps {
        assert!((j - 2.0).abs() < 1e-9, "{jumps:?}");
    }
}

#[test]
fn odd_polynomial_source_is_reproduced() {
    // v = y2³ + y1² y2 has Δ²v = 0 and an odd extension equal to itself.
    let grid = GridSpec::new(33, 17, (-1.0, 1.0), (0.0, 1.0)).unwrap();
    let v = GridField::from_fn(grid, |y| y[1].powi(3) + y[0] * y[0] * y[1]);
    let r = reflect_pair(&v, &GridField::zeros(grid), 1e-14).unwrap();
    let rep = verify_extension(&r, 0.9, 3, 2);
    assert!(rep.max < 1e-8, "{rep:?}");
    assert!(rep.jumps.third < 1e-8);
}

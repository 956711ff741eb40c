//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The wrappers only convert errors; the `*_impl` functions hold the logic
//! so they can be tested natively.

use plate_core::carleman::{make_test_function, CarlemanIntegrals, Profile, TestFunctionSpec};
use plate_core::doubling::{optimize_tau_to_doubling, quasi_doubling_check, QuasiMasses, QuasiRadii};
use plate_core::grid::GridSpec;
use plate_core::material::{poisson, stiffness, stiffness_lame, young};
use plate_core::{Error, Result};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request for a Carleman cell.
pub const MAX_CARLEMAN_NODES: usize = 257;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[E, ν, B (through E, ν), B (Lamé form)]` for constant moduli.
pub fn plate_constants_impl(lambda: f64, mu: f64, h: f64) -> Result<Vec<f64>> {
    if !(mu > 0.0) || !(2.0 * mu + 3.0 * lambda > 0.0) || !(h > 0.0) {
        return Err(Error::Validation(format!(
            "need mu > 0, 2 mu + 3 lambda > 0 and h > 0 (got lambda = {lambda}, mu = {mu}, h = {h})"
        )));
    }
    let (e, nu) = (young(lambda, mu), poisson(lambda, mu));
    Ok(vec![e, nu, stiffness(e, nu, h), stiffness_lame(lambda, mu, h)])
}

#[wasm_bindgen]
pub fn plate_constants(lambda: f64, mu: f64, h: f64) -> Result<Vec<f64>, JsError> {
    plate_constants_impl(lambda, mu, h).map_err(js)
}

/// Frontier `C_min(τ)` of the quasi-doubling inequality for masses `ρ^κ`,
/// and the τ-balanced doubling statement.
#[wasm_bindgen]
pub struct Frontier {
    taus: Vec<f64>,
    c_min: Vec<f64>,
    tau_balance: f64,
    tau: f64,
    constant: f64,
    exponent: f64,
}

#[wasm_bindgen]
impl Frontier {
    pub fn taus(&self) -> Vec<f64> {
        self.taus.clone()
    }

    pub fn c_min(&self) -> Vec<f64> {
        self.c_min.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn tau_balance(&self) -> f64 {
        self.tau_balance
    }

    #[wasm_bindgen(getter)]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[wasm_bindgen(getter)]
    pub fn constant(&self) -> f64 {
        self.constant
    }

    #[wasm_bindgen(getter)]
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

pub fn quasi_frontier_impl(r: f64, rbar: f64, rbar0: f64, kappa: f64, tau_max: f64, count: usize) -> Result<Frontier> {
    if !(kappa > 0.0) || !(tau_max > 1.0) || count < 2 {
        return Err(Error::Validation("need kappa > 0, tau_max > 1 and at least two samples".into()));
    }
    let radii = QuasiRadii::new(r, rbar, rbar0)?;
    let masses = QuasiMasses::from_fn(radii, |s| s.powf(kappa));
    let taus: Vec<f64> = (0..count).map(|k| 1.0 + (tau_max - 1.0) * k as f64 / (count - 1) as f64).collect();
    let q = quasi_doubling_check(masses, radii, &taus, 1.0)?;
    let st = optimize_tau_to_doubling(&q, masses.m_rbar0 / masses.m_r)?;
    Ok(Frontier {
        c_min: q.rows.iter().map(|row| row.c_min).collect(),
        taus,
        tau_balance: st.tau_balance,
        tau: st.tau,
        constant: st.constant,
        exponent: st.exponent,
    })
}

#[wasm_bindgen]
pub fn quasi_frontier(r: f64, rbar: f64, rbar0: f64, kappa: f64, tau_max: f64, count: usize) -> Result<Frontier, JsError> {
    quasi_frontier_impl(r, rbar, rbar0, kappa, tau_max, count).map_err(js)
}

/// `[lhs, rhs, ratio]` of the Carleman estimate for one seeded test function
/// on an `n × n` grid over `[-1, 1]²`.
pub fn carleman_cell_impl(r_in: f64, r_out: f64, seed: u64, tau: f64, r: f64, n: usize) -> Result<Vec<f64>> {
    if !(17..=MAX_CARLEMAN_NODES).contains(&n) {
        return Err(Error::Validation(format!("grid size must be in 17..={MAX_CARLEMAN_NODES}")));
    }
    let spec = TestFunctionSpec {
        r_in,
        r_out,
        profile: Profile::Harmonic,
        seed,
    };
    let u = make_test_function(&spec, GridSpec::new(n, n, (-1.0, 1.0), (-1.0, 1.0))?)?;
    let cell = CarlemanIntegrals::new(&u).cell(tau, r)?;
    Ok(vec![cell.lhs(), cell.rhs, cell.ratio.unwrap_or(f64::NAN)])
}

#[wasm_bindgen]
pub fn carleman_cell(r_in: f64, r_out: f64, seed: u32, tau: f64, r: f64, n: usize) -> Result<Vec<f64>, JsError> {
    carleman_cell_impl(r_in, r_out, u64::from(seed), tau, r, n).map_err(js)
}

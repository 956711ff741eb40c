//! Finite-difference stencils on uniform grids.

use crate::grid::GridField;

/// Fornberg's algorithm: weights for derivatives `0..=m` at `x0` from the
/// nodes `xs`. Returns `w[d][k]`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights of the centered stencil for the `deriv`-th derivative with the
/// given even order of accuracy, in units of `h = 1`. Offsets run from
/// `-half` to `half`.
pub fn central_weights(deriv: usize, accuracy: usize) -> Vec<f64> {
    let width = central_width(deriv, accuracy);
    let half = (width / 2) as f64;
    let xs: Vec<f64> = (0..width).map(|k| k as f64 - half).collect();
    fornberg(0.0, &xs, deriv).swap_remove(deriv)
}

fn central_width(deriv: usize, accuracy: usize) -> usize {
    2 * ((deriv + 1) / 2) - 1 + accuracy
}

/// A derivative operator along one axis of `n` uniformly spaced nodes:
/// centered in the bulk, shifted one-sided windows of `deriv + accuracy`
/// points near the ends.
#[derive(Debug, Clone)]
pub struct Diff1D {
    pub n: usize,
    pub h: f64,
    pub deriv: usize,
    stencils: Vec<(usize, Vec<f64>)>,
}

impl Diff1D {
    pub fn new(n: usize, h: f64, deriv: usize, accuracy: usize) -> Self {
        let wc = central_width(deriv, accuracy);
        let ws = (deriv + accuracy).max(wc).min(n);
        assert!(n > deriv, "{n} nodes cannot resolve derivative {deriv}");
        let scale = h.powi(deriv as i32);
        let central: Vec<f64> = central_weights(deriv, accuracy).into_iter().map(|w| w / scale).collect();
        let half = wc / 2;
        let mut stencils = Vec::with_capacity(n);
        for k in 0..n {
            if wc <= n && k >= half && k + half < n {
                stencils.push((k - half, central.clone()));
            } else {
                let start = k.saturating_sub(ws / 2).min(n - ws);
                let xs: Vec<f64> = (start..start + ws).map(|i| i as f64 - k as f64).collect();
                let w = fornberg(0.0, &xs, deriv).swap_remove(deriv);
                stencils.push((start, w.into_iter().map(|w| w / scale).collect()));
            }
        }
        Self { n, h, deriv, stencils }
    }

    pub fn stencil(&self, k: usize) -> (usize, &[f64]) {
        let (s, w) = &self.stencils[k];
        (*s, w)
    }

    /// Applies the operator to a strided line `values[offset + k * stride]`.
    #[inline]
    pub fn apply_at(&self, values: &[f64], offset: usize, stride: usize, k: usize) -> f64 {
        let (start, w) = &self.stencils[k];
        let mut acc = 0.0;
        for (a, wa) in w.iter().enumerate() {
            acc += wa * values[offset + (start + a) * stride];
        }
        acc
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n).map(|k| self.apply_at(values, 0, 1, k)).collect()
    }
}

/// Partial derivative `∂x^dx ∂y^dy` of a grid field, computed axis by axis.
pub fn partial(field: &GridField, dx: usize, dy: usize, accuracy: usize) -> GridField {
    let g = field.grid;
    let mut values = field.values.clone();
    if dx > 0 {
        let op = Diff1D::new(g.nx, g.hx(), dx, accuracy);
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                out[g.index(i, j)] = op.apply_at(&values, j * g.nx, 1, i);
            }
        }
        values = out;
    }
    if dy > 0 {
        let op = Diff1D::new(g.ny, g.hy(), dy, accuracy);
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                out[g.index(i, j)] = op.apply_at(&values, i, g.nx, j);
            }
        }
        values = out;
    }
    GridField {
        grid: g,
        values,
        mask: field.mask.clone(),
    }
}

/// Laplacian of a grid field.
pub fn laplacian(field: &GridField, accuracy: usize) -> GridField {
    partial(field, 2, 0, accuracy).zip_with(&partial(field, 0, 2, accuracy), |a, b| a + b)
}

/// All partials up to `max_order`, indexed as `d[order][k]` with `k` the
/// number of `y` derivatives.
pub fn derivative_stack(field: &GridField, max_order: usize, accuracy: usize) -> Vec<Vec<GridField>> {
    (0..=max_order)
        .map(|o| (0..=o).map(|k| partial(field, o - k, k, accuracy)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn classical_stencils() {
        let w = central_weights(2, 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = central_weights(4, 2);
        for (a, b) in w.iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = central_weights(1, 4);
        for (a, b) in w.iter().zip([1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_edges_keep_polynomial_exactness() {
        let n = 12;
        let h = 0.1;
        let xs: Vec<f64> = (0..n).map(|k| 0.3 + k as f64 * h).collect();
        let p = |x: f64| 2.0 - x + 0.5 * x * x - x.powi(3) + 0.25 * x.powi(4);
        let d3 = |x: f64| -6.0 + 6.0 * x;
        let values: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let op = Diff1D::new(n, h, 3, 2);
        for (k, v) in op.apply(&values).into_iter().enumerate() {
            assert!((v - d3(xs[k])).abs() < 1e-7, "node {k}: {v}");
        }
    }

    #[test]
    fn laplacian_of_quadratic() {
        let g = GridSpec::new(11, 9, (0.0, 1.0), (-1.0, 0.5)).unwrap();
        let f = GridField::from_fn(g, |p| p[0] * p[0] + 3.0 * p[1] * p[1] - p[0] * p[1]);
        let lap = laplacian(&f, 2);
        for v in lap.values {
            assert!((v - 8.0).abs() < 1e-8);
        }
    }
}

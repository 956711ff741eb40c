//! Banded symmetric positive-definite systems.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Receives matrix contributions during assembly.
pub trait MatrixSink {
    fn add(&mut self, i: usize, j: usize, v: f64);
}

/// Lower band of a symmetric matrix: row `i` stores columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.slot(i, i)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - j0);
            let mut acc = 0.0;
            for (k, j) in (j0..i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc + row[self.bw] * x[i];
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn factor(mut self) -> Result<CholeskyFactor> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let max_diag = (0..n).map(|i| self.diag(i).abs()).fold(0.0, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return Err(Error::Singular("matrix has no positive diagonal".into()));
        }
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut s = self.data[ri + j];
                for k in k0..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    let ratio = if max_pivot > 0.0 { s / (max_pivot * max_pivot) } else { 1.0 };
                    if !(s > 1e-15 * max_diag) || !s.is_finite() {
                        return Err(Error::Breakdown {
                            index: i,
                            pivot: s,
                            ratio,
                        });
                    }
                    let d = s.sqrt();
                    min_pivot = min_pivot.min(d);
                    max_pivot = max_pivot.max(d);
                    self.data[ri + j] = d;
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(CholeskyFactor {
            l: self,
            min_pivot,
            max_pivot,
        })
    }
}

impl MatrixSink for BandedSym {
    /// Accepts only lower-triangle entries; upper ones are implied.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
            let s = self.slot(i, j);
            self.data[s] += v;
        }
    }
}

/// Cholesky factor with pivot statistics.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: BandedSym,
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl CholeskyFactor {
    /// Squared pivot ratio, a cheap lower estimate of the condition number.
    pub fn condition_estimate(&self) -> f64 {
        (self.max_pivot / self.min_pivot).powi(2)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        let mut y = b.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let mut s = y[i];
            for j in j0..i {
                s -= d[ri + j] * y[j];
            }
            y[i] = s / d[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            y[i] /= d[ri + i];
            let yi = y[i];
            for j in i.saturating_sub(bw)..i {
                y[j] -= d[ri + j] * yi;
            }
        }
        y
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub min_pivot: f64,
    pub max_pivot: f64,
    pub condition_estimate: f64,
    pub refinement_steps: usize,
    pub relative_residual: f64,
}

/// Factor-and-solve with iterative refinement against the original matrix.
pub fn solve_spd(a: BandedSym, b: &[f64], refinement: usize) -> Result<(Vec<f64>, SolveStats)> {
    let original = if refinement > 0 { Some(a.clone()) } else { None };
    let factor = a.factor()?;
    let mut x = factor.solve(b);
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut rel = f64::NAN;
    let mut steps = 0;
    if let Some(a) = &original {
        for _ in 0..refinement {
            let ax = a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
            let dx = factor.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            steps += 1;
        }
        let ax = a.matvec(&x);
        rel = b.iter().zip(&ax).map(|(b, ax)| (b - ax).powi(2)).sum::<f64>().sqrt() / bnorm;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("solution contains non-finite values".into()));
    }
    Ok((
        x,
        SolveStats {
            min_pivot: factor.min_pivot,
            max_pivot: factor.max_pivot,
            condition_estimate: factor.condition_estimate(),
            refinement_steps: steps,
            relative_residual: rel,
        },
    ))
}

/// Full sparse storage used to inspect assembled matrices in tests.
#[derive(Debug, Default, Clone)]
pub struct SparseSink {
    pub entries: HashMap<(usize, usize), f64>,
}

impl MatrixSink for SparseSink {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.entries.entry((i, j)).or_insert(0.0) += v;
    }
}

impl SparseSink {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(i, j), &v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize, shift: f64) -> BandedSym {
        let mut a = BandedSym::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 + shift);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let a = laplacian_1d(n, 0.0);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x_true);
        let (x, stats) = solve_spd(a, &b, 2).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(stats.relative_residual < 1e-13);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let mut a = BandedSym::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        match a.factor() {
            Err(Error::Breakdown { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn random_banded_spd_systems(seed in 0u64..1000, n in 3usize..40, bw in 1usize..5) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bw = bw.min(n - 1);
            let mut a = BandedSym::zeros(n, bw);
            for i in 0..n {
                let mut off = 0.0;
                for j in i.saturating_sub(bw)..i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a.add(i, j, v);
                    off += v.abs();
                }
                a.add(i, i, 2.0 * bw as f64 + off + 1.0);
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = a.matvec(&x_true);
            let (x, _) = solve_spd(a, &b, 1).unwrap();
            for (u, v) in x.iter().zip(&x_true) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}

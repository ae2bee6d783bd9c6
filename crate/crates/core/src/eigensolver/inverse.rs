//! Inverse iteration on a real upper Hessenberg matrix with a complex shift.
//!
//! The LU factorization of `H − λI` with partial pivoting only ever swaps
//! adjacent rows, so it is built one row at a time from a row-major copy of
//! `H` and needs no copy of the full matrix per shift.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Row-major copy of a Hessenberg matrix, reused across many shifts.
pub struct HessenbergRows {
    m: usize,
    rows: Vec<f64>,
    norm: f64,
    // workspace: packed upper triangle of U, multipliers and swap flags
    u: Vec<Complex64>,
    mult: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl HessenbergRows {
    pub fn new(h: &DMatrix<f64>) -> Self {
        let m = h.nrows();
        let mut rows = vec![0.0; m * m];
        for i in 0..m {
            for j in i.saturating_sub(1)..m {
                rows[i * m + j] = h[(i, j)];
            }
        }
        let norm = h.norm();
        Self {
            m,
            rows,
            norm,
            u: vec![Complex64::new(0.0, 0.0); m * (m + 1) / 2],
            mult: vec![Complex64::new(0.0, 0.0); m],
            swapped: vec![false; m],
        }
    }

    fn factor(&mut self, lambda: Complex64) {
        let m = self.m;
        let tiny = f64::EPSILON * self.norm.max(f64::MIN_POSITIVE);
        let mut w: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(self.rows[j], 0.0) - if j == 0 { lambda } else { Complex64::new(0.0, 0.0) })
            .collect();
        let mut off = 0usize;
        for k in 0..m {
            // w holds the working row, entries k..m
            if k + 1 < m {
                let next = &self.rows[(k + 1) * m..(k + 2) * m];
                let below = Complex64::new(next[k], 0.0);
                let swap = below.norm() > w[k].norm();
                self.swapped[k] = swap;
                let (piv_is_next, pivot) = if swap { (true, below) } else { (false, w[k]) };
                let pivot = if pivot.norm() == 0.0 {
                    Complex64::new(tiny, 0.0)
                } else {
                    pivot
                };
                let other_k = if swap { w[k] } else { below };
                let l = other_k / pivot;
                self.mult[k] = l;
                let len = m - k;
                for j in k..m {
                    let nj = Complex64::new(next[j], 0.0) - if j == k + 1 { lambda } else { Complex64::new(0.0, 0.0) };
                    let (p, o) = if piv_is_next { (nj, w[j]) } else { (w[j], nj) };
                    let p = if j == k { pivot } else { p };
                    self.u[off + (j - k)] = p;
                    w[j] = o - l * p;
                }
                off += len;
            } else {
                let p = if w[k].norm() == 0.0 {
                    Complex64::new(tiny, 0.0)
                } else {
                    w[k]
                };
                self.u[off] = p;
                off += 1;
            }
        }
    }

    fn solve_in_place(&self, x: &mut [Complex64]) {
        let m = self.m;
        for k in 0..m.saturating_sub(1) {
            if self.swapped[k] {
                x.swap(k, k + 1);
            }
            let l = self.mult[k];
            let xk = x[k];
            x[k + 1] -= l * xk;
        }
        // back substitution with the packed rows of U
        let mut starts = Vec::with_capacity(m);
        let mut off = 0;
        for k in 0..m {
            starts.push(off);
            off += m - k;
        }
        for k in (0..m).rev() {
            let row = &self.u[starts[k]..starts[k] + (m - k)];
            let mut s = x[k];
            for (j, &ukj) in row.iter().enumerate().skip(1) {
                s -= ukj * x[k + j];
            }
            x[k] = s / row[0];
        }
    }

    /// Approximate eigenvector of `H` for the eigenvalue estimate `lambda`,
    /// normalized to unit 2-norm. Returns the vector and `‖Hx − λx‖/‖H‖`.
    pub fn eigenvector(&mut self, lambda: Complex64, steps: usize) -> (Vec<Complex64>, f64) {
        let m = self.m;
        let shift = lambda + Complex64::new(1.0, 1.0) * (f64::EPSILON * 16.0 * (self.norm + lambda.norm()));
        self.factor(shift);
        let mut x: Vec<Complex64> = (0..m)
            .map(|i| Complex64::new(1.0 + 0.5 * ((i as f64) * 0.7548776662466927).fract(), 0.0))
            .collect();
        for _ in 0..steps.max(1) {
            self.solve_in_place(&mut x);
            let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                break;
            }
            for z in &mut x {
                *z /= nrm;
            }
        }
        let res = self.residual(&x, lambda);
        (x, res)
    }

    fn residual(&self, x: &[Complex64], lambda: Complex64) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for i in 0..m {
            let row = &self.rows[i * m..(i + 1) * m];
            let mut s = -lambda * x[i];
            for j in i.saturating_sub(1)..m {
                s += x[j] * row[j];
            }
            acc += s.norm_sqr();
        }
        acc.sqrt() / self.norm.max(f64::MIN_POSITIVE)
    }
}

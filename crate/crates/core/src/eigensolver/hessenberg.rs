//! Householder reduction of a real square matrix to upper Hessenberg form.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Result of `Qᵀ A Q = H`. The orthogonal factor is kept as the sequence of
/// Householder reflectors `I − τ v vᵀ`, reflector `k` acting on rows
/// `k+1..n`.
#[derive(Debug, Clone)]
pub struct HessenbergReduction {
    pub h: DMatrix<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl HessenbergReduction {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Overwrite `x` with `Q x`.
    pub fn apply_q(&self, x: &mut [Complex64]) {
        for (k, (v, tau)) in self.reflectors.iter().enumerate().rev() {
            if *tau == 0.0 {
                continue;
            }
            let tail = &mut x[k + 1..];
            let mut dot = Complex64::new(0.0, 0.0);
            for (vi, xi) in v.iter().zip(tail.iter()) {
                dot += *xi * *vi;
            }
            let scale = dot * *tau;
            for (vi, xi) in v.iter().zip(tail.iter_mut()) {
                *xi -= scale * *vi;
            }
        }
    }

    /// Dense accumulation of `Q`.
    pub fn q(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut q = DMatrix::<f64>::identity(n, n);
        let data = q.as_mut_slice();
        for (k, (v, tau)) in self.reflectors.iter().enumerate().rev() {
            if *tau == 0.0 {
                continue;
            }
            // Q ← H_k Q, only rows k+1.. are touched
            for j in 0..n {
                let col = &mut data[j * n + k + 1..(j + 1) * n];
                let s = tau * dot(v, col);
                for (vi, ci) in v.iter().zip(col.iter_mut()) {
                    *ci -= s * vi;
                }
            }
        }
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Reduce `a` to upper Hessenberg form by Householder similarity.
///
/// The right update of step `k` is deferred and fused with the left update
/// and accumulation of step `k + 1`, so each step streams the trailing
/// columns once.
pub fn reduce(a: &DMatrix<f64>) -> HessenbergReduction {
    assert!(a.is_square(), "hessenberg reduction requires a square matrix");
    let n = a.nrows();
    let mut h = a.clone();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n.saturating_sub(2));
    if n < 3 {
        return HessenbergReduction { h, reflectors };
    }
    let data = h.as_mut_slice();
    // deferred right update `A[:, k..] -= tau w vᵀ` left over from step k - 1
    let mut pending: Option<(f64, Vec<f64>)> = None;
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        let prev_v = reflectors.last().map(|(v, _)| v.as_slice()).unwrap_or(&[]);
        let deferred = pending.as_ref().map(|(tau, w)| (*tau, w.as_slice(), prev_v));
        let apply_deferred = |col: &mut [f64], j: usize| {
            if let Some((tau, w, v)) = deferred {
                let s = tau * v[j - k];
                for (c, wr) in col.iter_mut().zip(w) {
                    *c -= s * wr;
                }
            }
        };

        let col_k = k * n;
        apply_deferred(&mut data[col_k..col_k + n], k);
        let x = &data[col_k + k + 1..col_k + n];
        let alpha_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail_norm = x[1..].iter().map(|v| v * v).sum::<f64>();
        if alpha_norm == 0.0 || tail_norm == 0.0 {
            for j in k + 1..n {
                apply_deferred(&mut data[j * n..(j + 1) * n], j);
            }
            reflectors.push((Vec::new(), 0.0));
            pending = None;
            continue;
        }
        let x0 = x[0];
        let alpha = if x0 >= 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] = x0 - alpha;
        let vtv = v[0] * v[0] + tail_norm;
        let tau = 2.0 / vtv;

        // column k: becomes alpha e_1 below the diagonal
        data[col_k + k + 1] = alpha;
        for r in k + 2..n {
            data[col_k + r] = 0.0;
        }

        // one pass over columns k+1..n: finish the deferred right update,
        // apply the left reflector, accumulate w = A[:, k+1..] v
        let mut w_next = std::mem::take(&mut w);
        w_next.iter_mut().for_each(|x| *x = 0.0);
        for (i, vi) in v.iter().enumerate() {
            let j = k + 1 + i;
            let col = &mut data[j * n..(j + 1) * n];
            apply_deferred(col, j);
            let lower = &mut col[k + 1..];
            let s = tau * dot(&v, lower);
            for (vr, c) in v.iter().zip(lower.iter_mut()) {
                *c -= s * vr;
            }
            for (wr, c) in w_next.iter_mut().zip(col.iter()) {
                *wr += vi * c;
            }
        }
        if let Some((_, old)) = pending.take() {
            w = old;
        } else {
            w = vec![0.0; n];
        }
        pending = Some((tau, w_next));
        reflectors.push((v, tau));
    }
    if let Some((tau, w)) = pending {
        let k = n - 2;
        let v = &reflectors[k - 1].0;
        for j in k..n {
            let s = tau * v[j - k];
            for (c, wr) in data[j * n..(j + 1) * n].iter_mut().zip(&w) {
                *c -= s * wr;
            }
        }
    }
    HessenbergReduction { h, reflectors }
}

/// `(H, Q)` with `Qᵀ A Q = H`, `H` upper Hessenberg and `Q` orthogonal.
pub fn hessenberg(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let red = reduce(a);
    let q = red.q();
    (red.h, q)
}

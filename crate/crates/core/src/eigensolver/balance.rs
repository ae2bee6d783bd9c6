//! Diagonal similarity scaling (Parlett–Reinsch, radix 2).

use nalgebra::DMatrix;

const RADIX: f64 = 2.0;

/// Diagonal scaling record: the balanced matrix is `D⁻¹ A D` with
/// `D = diag(factors)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub factors: Vec<f64>,
}

impl Scaling {
    pub fn identity(n: usize) -> Self {
        Self { factors: vec![1.0; n] }
    }

    /// Map an eigenvector of the balanced matrix back to the original one.
    pub fn unscale<T>(&self, x: &mut [T])
    where
        T: Copy + std::ops::MulAssign<f64>,
    {
        for (xi, &d) in x.iter_mut().zip(&self.factors) {
            *xi *= d;
        }
    }
}

/// Balance `a` by powers of two so that off-diagonal row and column
/// 1-norms are comparable. Eigenvalues are unchanged and, since only
/// powers of the radix are used, no rounding is introduced.
pub fn balance(a: &DMatrix<f64>) -> (DMatrix<f64>, Scaling) {
    assert!(a.is_square(), "balance requires a square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = vec![1.0; n];
    let sqrdx = RADIX * RADIX;

    loop {
        let mut changed = false;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                changed = true;
                d[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (m, Scaling { factors: d })
}

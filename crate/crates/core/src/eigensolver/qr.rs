//! Complex single-shift QR iteration on an upper Hessenberg matrix.
//!
//! Eigenvalues only: every rotation is confined to the active diagonal
//! window, so the Schur form outside it is never formed. Deflation uses the
//! Ahues–Tisseur test; shifts are Wilkinson shifts from the trailing 2×2
//! block, with exceptional shifts after 10 and 20 stalled sweeps.
//!
//! The sweep cap is a pooled budget of `max_sweeps` sweeps per eigenvalue,
//! charged against the running total over the whole matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Default sweep budget per eigenvalue.
pub const DEFAULT_MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct QrOutcome {
    pub eigenvalues: Vec<Complex64>,
    /// `false` for eigenvalues still undeflated when the budget ran out;
    /// the value is then the diagonal entry left in place.
    pub converged: Vec<bool>,
    pub sweeps: usize,
}

impl QrOutcome {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

#[inline]
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Column-major working copy.
struct Work {
    n: usize,
    a: Vec<Complex64>,
}

impl Work {
    #[inline]
    fn get(&self, r: usize, c: usize) -> Complex64 {
        self.a[c * self.n + r]
    }
    #[inline]
    fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.a[c * self.n + r] = v;
    }

    /// Rows k, k+1 ← G [rows], for columns `cols`.
    #[inline]
    fn rotate_rows(&mut self, k: usize, c: f64, s: Complex64, cols: std::ops::RangeInclusive<usize>) {
        let n = self.n;
        let sc = s.conj();
        for j in cols {
            let base = j * n + k;
            let x = self.a[base];
            let y = self.a[base + 1];
            self.a[base] = x * c + s * y;
            self.a[base + 1] = y * c - sc * x;
        }
    }

    /// Columns k, k+1 ← [columns] Gᴴ, for rows `lo..=hi`.
    #[inline]
    fn rotate_cols(&mut self, k: usize, c: f64, s: Complex64, lo: usize, hi: usize) {
        let n = self.n;
        let sc = s.conj();
        let (left, right) = self.a.split_at_mut((k + 1) * n);
        let p = &mut left[k * n + lo..k * n + hi + 1];
        let q = &mut right[lo..hi + 1];
        for (x, y) in p.iter_mut().zip(q.iter_mut()) {
            let xv = *x;
            let yv = *y;
            *x = xv * c + yv * sc;
            *y = yv * c - xv * s;
        }
    }
}

/// Rotation `[c s; −s̄ c]` mapping `(x, y)` to `(r, 0)`, with `c` real.
#[inline]
pub(crate) fn givens(x: Complex64, y: Complex64) -> (f64, Complex64, Complex64) {
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), x);
    }
    let ax = x.norm();
    if ax == 0.0 {
        let s = y.conj() / ay;
        return (0.0, s, Complex64::new(ay, 0.0));
    }
    let norm = ax.hypot(ay);
    let phase = x / ax;
    let c = ax / norm;
    let s = phase * y.conj() / norm;
    (c, s, phase * norm)
}

/// Eigenvalue of `[[a, b], [c, d]]` closer to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let t = (a - d) * 0.5;
    let bc = b * c;
    if bc.norm() == 0.0 {
        return if (a - d).norm() > 0.0 && a.norm() < 0.0 { a } else { d };
    }
    let disc = (t * t + bc).sqrt();
    let den_p = t + disc;
    let den_m = t - disc;
    let den = if den_p.norm() >= den_m.norm() { den_p } else { den_m };
    if den.norm() == 0.0 {
        d
    } else {
        d - bc / den
    }
}

/// All eigenvalues of the upper Hessenberg matrix `h`.
///
/// Entries below the first subdiagonal are ignored. Eigenvalues are
/// returned in the order they deflate at the bottom of the active window,
/// i.e. `eigenvalues[i]` is the converged `(i, i)` entry.
pub fn qr_eigenvalues(h: &DMatrix<Complex64>, max_sweeps: usize) -> QrOutcome {
    assert!(h.is_square(), "QR iteration requires a square matrix");
    let n = h.nrows();
    let mut w = Work {
        n,
        a: h.as_slice().to_vec(),
    };
    for j in 0..n {
        for i in j + 2..n {
            w.set(i, j, Complex64::new(0.0, 0.0));
        }
    }
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let mut converged = vec![true; n];
    let mut total = 0usize;
    let budget = max_sweeps.saturating_mul(n);
    if n == 0 {
        return QrOutcome {
            eigenvalues: eig,
            converged,
            sweeps: 0,
        };
    }

    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
    let zero = Complex64::new(0.0, 0.0);

    let mut i = n as isize - 1;
    while i >= 0 {
        let iu = i as usize;
        let mut l = 0usize;
        let mut its = 0usize;
        let mut done = false;
        loop {
            // look for a negligible subdiagonal entry
            let mut k = iu;
            while k > l {
                let sub = cabs1(w.get(k, k - 1));
                if sub <= smlnum {
                    break;
                }
                let mut tst = cabs1(w.get(k - 1, k - 1)) + cabs1(w.get(k, k));
                if tst == 0.0 {
                    if k >= l + 2 {
                        tst += w.get(k - 1, k - 2).re.abs();
                    }
                    if k < iu {
                        tst += w.get(k + 1, k).re.abs();
                    }
                }
                if sub <= ulp * tst {
                    let up = cabs1(w.get(k - 1, k));
                    let ab = sub.max(up);
                    let ba = sub.min(up);
                    let dkk = w.get(k, k);
                    let diff = cabs1(w.get(k - 1, k - 1) - dkk);
                    let aa = cabs1(dkk).max(diff);
                    let bb = cabs1(dkk).min(diff);
                    let s = aa + ab;
                    if ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s))) {
                        break;
                    }
                }
                k -= 1;
            }
            l = k;
            if l > 0 {
                w.set(l, l - 1, zero);
            }
            if l >= iu {
                done = true;
                break;
            }
            if total >= budget {
                break;
            }
            its += 1;
            total += 1;

            let shift = if its == 10 {
                w.get(l, l) + 0.75 * w.get(l + 1, l).re.abs()
            } else if its == 20 {
                w.get(iu, iu) + 0.75 * w.get(iu, iu - 1).re.abs()
            } else {
                wilkinson_shift(
                    w.get(iu - 1, iu - 1),
                    w.get(iu - 1, iu),
                    w.get(iu, iu - 1),
                    w.get(iu, iu),
                )
            };

            // implicit single-shift sweep over rows/cols l..=iu
            let (c, s, _) = givens(w.get(l, l) - shift, w.get(l + 1, l));
            w.rotate_rows(l, c, s, l..=iu);
            w.rotate_cols(l, c, s, l, (l + 2).min(iu));
            for k in l + 1..iu {
                let (c, s, r) = givens(w.get(k, k - 1), w.get(k + 1, k - 1));
                w.set(k, k - 1, r);
                w.set(k + 1, k - 1, zero);
                w.rotate_rows(k, c, s, k..=iu);
                w.rotate_cols(k, c, s, l, (k + 2).min(iu));
            }
        }
        if done {
            eig[iu] = w.get(iu, iu);
            i -= 1;
        } else {
            for k in l..=iu {
                eig[k] = w.get(k, k);
                converged[k] = false;
            }
            i = l as isize - 1;
        }
    }
    QrOutcome {
        eigenvalues: eig,
        converged,
        sweeps: total,
    }
}

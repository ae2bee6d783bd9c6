//! Analytic reference spectra.
//!
//! For a homogeneous rectangle the problem separates and `γ² = ε − λ`, with
//! `λ` a Dirichlet eigenvalue (from `Π`) or a nonzero Neumann eigenvalue
//! (from `Ψ`). For a rectangle loaded with a slab `0 < x < d` of
//! permittivity `ε₂` the LSE and LSM transverse-resonance conditions
//!
//! ```text
//! LSE: k₁ tan(k₂ d) + k₂ tan(k₁ (a−d)) = 0
//! LSM: (k₂/ε₂) tan(k₂ d) + (k₁/ε₁) tan(k₁ (a−d)) = 0
//! ```
//!
//! with `kⱼ² = εⱼ − γ² − (nπ/b)²` are solved along the real and imaginary
//! `γ` axes. Both are cleared of their poles by multiplying through with
//! `cos(k₁(a−d)) cos(k₂d) / (k₁k₂)`, which leaves entire functions of `γ²`:
//!
//! ```text
//! D_E = S(k₂², d) C(k₁², a−d) + S(k₁², a−d) C(k₂², d)
//! D_M = k₂²/ε₂ S(k₂², d) C(k₁², a−d) + k₁²/ε₁ S(k₁², a−d) C(k₂², d)
//! ```
//!
//! where `S(k², x) = sin(kx)/k` and `C(k², x) = cos(kx)`, continued through
//! `k² ≤ 0` with `sinh` and `cosh`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::output::{complex_17, f64_17, fmt17};
use crate::pencil::ExclusionInterval;

/// Default number of samples per axis segment.
pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleFamily {
    DirichletDerived,
    NeumannDerived,
    Lse,
    Lsm,
}

impl OracleFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleFamily::DirichletDerived => "DIRICHLET_DERIVED",
            OracleFamily::NeumannDerived => "NEUMANN_DERIVED",
            OracleFamily::Lse => "LSE",
            OracleFamily::Lsm => "LSM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlabFamily {
    Lse,
    Lsm,
}

impl From<SlabFamily> for OracleFamily {
    fn from(f: SlabFamily) -> Self {
        match f {
            SlabFamily::Lse => OracleFamily::Lse,
            SlabFamily::Lsm => OracleFamily::Lsm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRoot {
    #[serde(serialize_with = "complex_17")]
    pub gamma: Complex64,
    pub family: OracleFamily,
    pub m: usize,
    pub n: usize,
    /// Bracket in `γ²` that produced the root; degenerate for closed-form
    /// roots.
    pub bracket: [f64; 2],
    /// Normalized determinant at the root.
    #[serde(serialize_with = "f64_17")]
    pub residual: f64,
    /// `|γ|` lies in the exclusion interval.
    pub in_exclusion: bool,
}

impl OracleRoot {
    pub fn gamma_sq(&self) -> f64 {
        (self.gamma * self.gamma).re
    }
}

fn push_pair(
    out: &mut Vec<OracleRoot>,
    s: f64,
    family: OracleFamily,
    m: usize,
    n: usize,
    bracket: [f64; 2],
    residual: f64,
) {
    let g = if s >= 0.0 {
        Complex64::new(s.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-s).sqrt())
    };
    let mut add = |gamma: Complex64| {
        out.push(OracleRoot {
            gamma,
            family,
            m,
            n,
            bracket,
            residual,
            in_exclusion: false,
        })
    };
    add(g);
    if s != 0.0 {
        add(-g);
    }
}

/// All `γ` of a homogeneous `a × b` rectangle with `λ ≤ max_lambda`, both
/// signs, sorted by family, then `λ`, then `(m, n)`.
pub fn homogeneous_rect_spectrum(a: f64, b: f64, eps: f64, max_lambda: f64) -> Vec<OracleRoot> {
    let mut out = Vec::new();
    let mmax = (max_lambda.max(0.0).sqrt() * a / PI).floor() as usize;
    let nmax = (max_lambda.max(0.0).sqrt() * b / PI).floor() as usize;
    for (family, start) in [(OracleFamily::DirichletDerived, 1), (OracleFamily::NeumannDerived, 0)] {
        let mut modes = Vec::new();
        for m in start..=mmax {
            for n in start..=nmax {
                if m == 0 && n == 0 {
                    continue;
                }
                let lambda = (m as f64 * PI / a).powi(2) + (n as f64 * PI / b).powi(2);
                if lambda <= max_lambda {
                    modes.push((lambda, m, n));
                }
            }
        }
        modes.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        for (lambda, m, n) in modes {
            let s = eps - lambda;
            push_pair(&mut out, s, family, m, n, [s, s], 0.0);
        }
    }
    out
}

/// `(sin(kx)/k, cos(kx))` for `k² = q`, real for either sign of `q`.
fn sc(q: f64, x: f64) -> (f64, f64) {
    if q > 0.0 {
        let k = q.sqrt();
        ((k * x).sin() / k, (k * x).cos())
    } else if q < 0.0 {
        let k = (-q).sqrt();
        ((k * x).sinh() / k, (k * x).cosh())
    } else {
        (x, 1.0)
    }
}

/// Slab-loaded rectangular guide, region 2 occupying `0 < x < d`.
#[derive(Debug, Clone, Copy)]
pub struct SlabGuide {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl SlabGuide {
    fn wavenumbers(&self, s: f64, n: usize) -> (f64, f64) {
        let cut = (n as f64 * PI / self.b).powi(2);
        (self.eps1 - s - cut, self.eps2 - s - cut)
    }

    /// Cleared determinant at `γ² = s` together with a bound on the size of
    /// its terms that never vanishes, used to normalize residuals.
    pub fn determinant(&self, family: SlabFamily, n: usize, s: f64) -> (f64, f64) {
        let (q1, q2) = self.wavenumbers(s, n);
        let l = self.a - self.d;
        let (mut s1, c1) = sc(q1, l);
        let (mut s2, c2) = sc(q2, self.d);
        if family == SlabFamily::Lsm {
            s1 *= q1 / self.eps1;
            s2 *= q2 / self.eps2;
        }
        let det = s2 * c1 + s1 * c2;
        (det, (s1.abs() + c1.abs()) * (s2.abs() + c2.abs()))
    }

    fn normalized(&self, family: SlabFamily, n: usize, s: f64) -> f64 {
        let (d, scale) = self.determinant(family, n, s);
        d / scale
    }

    /// Roots with `|γ| ≤ radius` on the real and imaginary axes, both signs,
    /// sorted by decreasing `γ²`. `m` counts the roots of the family in that
    /// order, starting from zero. A root at which both `kⱼ²` vanish is the
    /// trivial solution of the homogeneous limit and is dropped.
    pub fn roots(&self, family: SlabFamily, n: usize, radius: f64, samples: usize) -> Vec<OracleRoot> {
        let r2 = radius * radius;
        let samples = samples.max(2);
        let mut found: Vec<(f64, [f64; 2])> = Vec::new();
        for (lo, hi) in [(-r2, 0.0), (0.0, r2)] {
            let grid: Vec<f64> = (0..=samples)
                .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
                .collect();
            let vals: Vec<f64> = grid.iter().map(|&s| self.normalized(family, n, s)).collect();
            for i in 0..samples {
                let (sa, sb) = (grid[i], grid[i + 1]);
                let (fa, fb) = (vals[i], vals[i + 1]);
                if fa == 0.0 {
                    found.push((sa, [sa, sa]));
                } else if fa * fb < 0.0 {
                    found.push((self.bisect(family, n, sa, sb, fa), [sa, sb]));
                }
            }
            if vals[samples] == 0.0 && hi > 0.0 {
                found.push((hi, [hi, hi]));
            }
        }
        found.sort_by(|x, y| y.0.total_cmp(&x.0));
        found.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-14 * (1.0 + y.0.abs()));
        found.retain(|(s, _)| {
            let (q1, q2) = self.wavenumbers(*s, n);
            let tiny = 1e-12 * (1.0 + s.abs());
            !(q1.abs() <= tiny && q2.abs() <= tiny)
        });
        let ex = ExclusionInterval::new(self.eps1, self.eps2);
        let mut out = Vec::new();
        for (m, (s, bracket)) in found.into_iter().enumerate() {
            let residual = self.normalized(family, n, s).abs();
            push_pair(&mut out, s, family.into(), m, n, bracket, residual);
        }
        for r in &mut out {
            r.in_exclusion = r.gamma.im == 0.0 && ex.contains_abs(r.gamma.re);
        }
        out
    }

    fn bisect(&self, family: SlabFamily, n: usize, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.normalized(family, n, mid);
            if fm == 0.0 {
                return mid;
            }
            if fa * fm < 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        let (fa, fb) = (self.normalized(family, n, a).abs(), self.normalized(family, n, b).abs());
        if fa <= fb {
            a
        } else {
            b
        }
    }
}

/// Roots of the slab determinant for transverse index `n` with
/// `|γ| ≤ radius`.
#[allow(clippy::too_many_arguments)]
pub fn slab_dispersion_roots(
    a: f64,
    b: f64,
    d: f64,
    eps1: f64,
    eps2: f64,
    n: usize,
    family: SlabFamily,
    radius: f64,
) -> Vec<OracleRoot> {
    SlabGuide { a, b, d, eps1, eps2 }.roots(family, n, radius, DEFAULT_SAMPLES)
}

/// CSV with header `family,m,n,re,im,residual`.
pub fn roots_csv(roots: &[OracleRoot]) -> crate::error::Result<String> {
    use crate::pipeline::{csv_err, finish};
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "m", "n", "re", "im", "residual"])
        .map_err(csv_err)?;
    for r in roots {
        w.write_record([
            r.family.as_str().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            fmt17(r.gamma.re),
            fmt17(r.gamma.im),
            fmt17(r.residual),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gammas_sq(roots: &[OracleRoot]) -> Vec<f64> {
        let mut v: Vec<f64> = roots
            .iter()
            .filter(|r| r.gamma.re >= 0.0 && r.gamma.im >= 0.0)
            .map(|r| r.gamma_sq())
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn homogeneous_square_examples() {
        let r = homogeneous_rect_spectrum(PI, PI, 2.0, 5.0);
        let neumann_one: Vec<_> = r
            .iter()
            .filter(|x| x.family == OracleFamily::NeumannDerived && (x.gamma.re - 1.0).abs() < 1e-14)
            .collect();
        assert_eq!(neumann_one.len(), 2);
        // λ = 2 is both the Dirichlet (1,1) and the Neumann (1,1) eigenvalue
        let zero: Vec<_> = r.iter().filter(|x| x.gamma.norm() < 1e-14).collect();
        assert_eq!(zero.len(), 2);
        assert_eq!(zero[0].family, OracleFamily::DirichletDerived);
        assert_eq!(zero[1].family, OracleFamily::NeumannDerived);
        let i3: Vec<_> = r
            .iter()
            .filter(|x| x.family == OracleFamily::DirichletDerived && (x.gamma.im - 3f64.sqrt()).abs() < 1e-14)
            .collect();
        assert_eq!(i3.len(), 2);
    }

    #[test]
    fn homogeneous_neumann_excludes_constant() {
        let r = homogeneous_rect_spectrum(PI, PI, 2.0, 0.5);
        assert!(r.is_empty());
    }

    #[test]
    fn lse_homogeneous_limit() {
        let g = SlabGuide {
            a: PI,
            b: PI,
            d: PI / 2.0,
            eps1: 2.0,
            eps2: 2.0,
        };
        let r = g.roots(SlabFamily::Lse, 0, 4.0, DEFAULT_SAMPLES);
        let s = gammas_sq(&r);
        let expect: Vec<f64> = (1..=4).map(|m| 2.0 - (m * m) as f64).collect();
        assert_eq!(s.len(), expect.len(), "{s:?}");
        for (x, y) in s.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
        assert!(
            r.iter().all(|x| x.residual <= 1e-12),
            "{:?}",
            r.iter().map(|x| (x.gamma_sq(), x.residual)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn lsm_homogeneous_limit_drops_trivial_root() {
        let g = SlabGuide {
            a: PI,
            b: PI,
            d: PI / 2.0,
            eps1: 1.0,
            eps2: 1.0,
        };
        let r = g.roots(SlabFamily::Lsm, 0, 4.0, DEFAULT_SAMPLES);
        let s = gammas_sq(&r);
        let expect: Vec<f64> = (1..=4).map(|m| 1.0 - (m * m) as f64).collect();
        assert_eq!(s.len(), expect.len(), "{s:?}");
        for (x, y) in s.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transverse_index_shifts_homogeneous_roots() {
        let g = SlabGuide {
            a: PI,
            b: PI,
            d: 1.0,
            eps1: 3.0,
            eps2: 3.0,
        };
        let r = g.roots(SlabFamily::Lse, 1, 4.0, DEFAULT_SAMPLES);
        let s = gammas_sq(&r);
        assert!((s[0] - (3.0 - 1.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn slab_roots_are_real_or_imaginary_and_signed() {
        let r = slab_dispersion_roots(PI, PI, PI / 2.0, 1.0, 4.0, 0, SlabFamily::Lse, 4.0);
        assert!(!r.is_empty());
        for x in &r {
            assert!(x.gamma.re == 0.0 || x.gamma.im == 0.0);
            assert!(x.residual <= 1e-12, "{}", x.residual);
            assert!(r.iter().any(|y| (y.gamma + x.gamma).norm() == 0.0));
        }
    }

    #[test]
    fn root_count_does_not_grow_with_transverse_index() {
        let g = SlabGuide {
            a: PI,
            b: PI,
            d: PI / 2.0,
            eps1: 1.0,
            eps2: 4.0,
        };
        let counts: Vec<usize> = (0..4)
            .map(|n| g.roots(SlabFamily::Lse, n, 3.0, DEFAULT_SAMPLES).len())
            .collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    }

    #[test]
    fn csv_has_one_line_per_root() {
        let r = homogeneous_rect_spectrum(PI, PI, 2.0, 2.0);
        let csv = roots_csv(&r).unwrap();
        assert_eq!(csv.lines().count(), r.len() + 1);
        assert!(csv.starts_with("family,m,n,re,im,residual"));
    }
}

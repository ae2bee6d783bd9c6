//! The quartic pencil
//! `L(γ) = γ⁴K + γ²(A1 − (ε₁+ε₂)K) + γ(ε₁−ε₂)S + ε₁ε₂(K − A2)`,
//! its exclusion interval, and companion linearizations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::assembly::PencilMatrices;
use crate::error::{Error, Result};

/// Coefficients `C₀ … C₄` of `L(γ) = Σ γᵏ Cₖ`; `C₃` is identically zero.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub c0: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub c4: DMatrix<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub dim_pi: usize,
    /// Frobenius norms of `C₀, C₁, C₂, C₃, C₄`.
    pub norms: [f64; 5],
}

/// Real-axis band `[lower, upper]` outside of which eigenvalues are
/// isolated; `p` is the characteristic magnitude used to scale `γ`.
///
/// A real `γ` lies outside the band exactly when
/// `|γ² − p²| > |δ|(1 + |γ|)`, which gives `lower` from the smaller
/// permittivity and `upper` from the larger one, in either order.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExclusionInterval {
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
    pub p: f64,
}

impl ExclusionInterval {
    pub fn new(eps1: f64, eps2: f64) -> Self {
        let delta = (eps2 - eps1) / 2.0;
        let d = delta.abs();
        let disc = |e: f64| (delta * delta + 4.0 * e).sqrt();
        Self {
            eps1,
            eps2,
            delta,
            lower: (disc(eps1.min(eps2)) - d) / 2.0,
            upper: (disc(eps1.max(eps2)) + d) / 2.0,
            p: ((eps1 + eps2) / 2.0).sqrt(),
        }
    }

    /// Positive degeneration points `√ε₁, √ε₂`.
    pub fn degeneration_points(&self) -> [f64; 2] {
        [self.eps1.sqrt(), self.eps2.sqrt()]
    }

    /// `|γ|` inside `[lower, upper]`.
    pub fn contains_abs(&self, x: f64) -> bool {
        let a = x.abs();
        a >= self.lower && a <= self.upper
    }
}

pub fn exclusion_interval(eps1: f64, eps2: f64) -> ExclusionInterval {
    ExclusionInterval::new(eps1, eps2)
}

/// `k̃² = ε − γ²`.
pub fn transverse_wavenumber_sq(eps: f64, gamma: Complex64) -> Complex64 {
    Complex64::new(eps, 0.0) - gamma * gamma
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

impl Pencil {
    pub fn new(m: &PencilMatrices) -> Result<Self> {
        let n = m.dim();
        for x in [&m.k, &m.a1, &m.a2, &m.s] {
            check_square(x, n)?;
        }
        let (e1, e2) = (m.eps1, m.eps2);
        let c0 = (&m.k - &m.a2) * (e1 * e2);
        let c1 = &m.s * (e1 - e2);
        let c2 = &m.a1 - &m.k * (e1 + e2);
        let c4 = m.k.clone();
        let norms = [c0.norm(), c1.norm(), c2.norm(), 0.0, c4.norm()];
        Ok(Self {
            c0,
            c1,
            c2,
            c4,
            eps1: e1,
            eps2: e2,
            dim_pi: m.dim_pi,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.c0.nrows()
    }

    /// `C₃`, which the pencil never populates.
    pub fn c3(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.dim(), self.dim())
    }

    pub fn exclusion(&self) -> ExclusionInterval {
        ExclusionInterval::new(self.eps1, self.eps2)
    }

    /// `|γ|⁴‖C₄‖ + |γ|²‖C₂‖ + |γ|‖C₁‖ + ‖C₀‖`.
    pub fn scale_at(&self, gamma: Complex64) -> f64 {
        let a = gamma.norm();
        a.powi(4) * self.norms[4] + a * a * self.norms[2] + a * self.norms[1] + self.norms[0]
    }

    /// Largest coefficient norm.
    pub fn max_coefficient_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }

    /// Dense `L(γ)`.
    pub fn evaluate(&self, gamma: Complex64) -> DMatrix<Complex64> {
        let g2 = gamma * gamma;
        let g4 = g2 * g2;
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            g4 * self.c4[(i, j)] + g2 * self.c2[(i, j)] + gamma * self.c1[(i, j)] + self.c0[(i, j)]
        })
    }

    /// `L(γ)` for real `γ`, which is real symmetric.
    pub fn evaluate_real(&self, gamma: f64) -> DMatrix<f64> {
        let g2 = gamma * gamma;
        let g4 = g2 * g2;
        &self.c4 * g4 + &self.c2 * g2 + &self.c1 * gamma + &self.c0
    }

    /// `L(γ) v` without forming `L(γ)`.
    pub fn apply(&self, gamma: Complex64, v: &DVector<Complex64>) -> DVector<Complex64> {
        let g2 = gamma * gamma;
        let g4 = g2 * g2;
        let mul = |m: &DMatrix<f64>| -> DVector<Complex64> {
            let re = m * v.map(|z| z.re);
            let im = m * v.map(|z| z.im);
            DVector::from_fn(v.len(), |i, _| Complex64::new(re[i], im[i]))
        };
        mul(&self.c4) * g4 + mul(&self.c2) * g2 + mul(&self.c1) * gamma + mul(&self.c0)
    }

    /// Scale-free backward error `‖L(γ)v‖ / (‖v‖ Σ|γ|ᵏ‖Cₖ‖)`.
    pub fn residual(&self, gamma: Complex64, v: &DVector<Complex64>) -> Result<f64> {
        let nv = v.norm();
        if nv == 0.0 {
            return Err(Error::ZeroVector);
        }
        let r = self.apply(gamma, v).norm();
        Ok(r / (nv * self.scale_at(gamma)))
    }

    /// Apply `P = diag(−I_Π, I_Ψ)`.
    pub fn flip(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut w = v.clone();
        for i in 0..self.dim_pi.min(w.len()) {
            w[i] = -w[i];
        }
        w
    }

    fn cholesky_k(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.c4.clone()).ok_or(Error::NotPositiveDefinite("K"))
    }

    /// Monic block companion of size `4n` for `L(p t)/p⁴` in the scaled
    /// variable `t = γ/p`, with `p` from [`ExclusionInterval`]. Its
    /// eigenvalues times `p` are the eigenvalues of `L`; the first block of
    /// an eigenvector is an eigenvector of `L`.
    pub fn linearize(&self) -> Result<Companion> {
        let n = self.dim();
        let p = self.exclusion().p;
        let chol = self.cholesky_k()?;
        let blocks = [
            chol.solve(&(&self.c0 / p.powi(4))),
            chol.solve(&(&self.c1 / p.powi(3))),
            chol.solve(&(&self.c2 / p.powi(2))),
        ];
        let mut a = DMatrix::zeros(4 * n, 4 * n);
        for k in 0..3 {
            a.view_mut((k * n, (k + 1) * n), (n, n)).fill_with_identity();
        }
        for (k, b) in blocks.iter().enumerate() {
            a.view_mut((3 * n, k * n), (n, n)).copy_from(&(-b));
        }
        Ok(Companion {
            matrix: a,
            kind: CompanionKind::Full,
            scale: p,
            n,
            dim_pi: self.dim_pi,
        })
    }

    /// Companion of size `2n` in `μ = γ²`. With `D(γ) = diag(I_Π, γI_Ψ)`,
    /// `D⁻¹ L(γ) D = μ²K + μB + C` where `B = C₂ + (ε₁−ε₂)S_ΠΨ` and
    /// `C = C₀ + (ε₁−ε₂)S_ΨΠ` collect the two coupling blocks, so
    /// `det L(γ) = det(μ²K + μB + C)`. Each eigenvalue `μ` gives the pair
    /// `γ = ±√μ`, and an eigenvector `w` maps to `(w_Π, γ w_Ψ)`.
    /// The variable is scaled as `μ = p² ν`.
    pub fn linearize_squared(&self) -> Result<Companion> {
        let n = self.dim();
        let np = self.dim_pi;
        let nq = n - np;
        let p = self.exclusion().p;
        let p2 = p * p;
        let mut b = self.c2.clone();
        b.view_mut((0, np), (np, nq))
            .copy_from(&self.c1.view((0, np), (np, nq)));
        let mut c = self.c0.clone();
        c.view_mut((np, 0), (nq, np))
            .copy_from(&self.c1.view((np, 0), (nq, np)));
        let chol = self.cholesky_k()?;
        let kc = chol.solve(&(c / (p2 * p2)));
        let kb = chol.solve(&(b / p2));
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (n, n)).copy_from(&(-kc));
        a.view_mut((n, n), (n, n)).copy_from(&(-kb));
        Ok(Companion {
            matrix: a,
            kind: CompanionKind::Squared,
            scale: p2,
            n,
            dim_pi: self.dim_pi,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompanionKind {
    /// `4n` companion in `t = γ/p`.
    Full,
    /// `2n` companion in `ν = γ²/p²`.
    Squared,
}

#[derive(Debug, Clone)]
pub struct Companion {
    pub matrix: DMatrix<f64>,
    pub kind: CompanionKind,
    /// Multiplier taking companion eigenvalues back to `γ` (full) or `γ²`
    /// (squared).
    pub scale: f64,
    pub n: usize,
    pub dim_pi: usize,
}

impl Companion {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Pencil eigenvalues carried by one companion eigenvalue.
    pub fn gammas(&self, lambda: Complex64) -> Vec<Complex64> {
        match self.kind {
            CompanionKind::Full => vec![lambda * self.scale],
            CompanionKind::Squared => {
                let g = (lambda * self.scale).sqrt();
                vec![g, -g]
            }
        }
    }

    /// Pencil eigenvector at `γ` from a companion eigenvector.
    pub fn pencil_vector(&self, z: &[Complex64], gamma: Complex64) -> DVector<Complex64> {
        let n = self.n;
        match self.kind {
            CompanionKind::Full => DVector::from_column_slice(&z[..n]),
            CompanionKind::Squared => DVector::from_fn(n, |i, _| if i < self.dim_pi { z[i] } else { z[i] * gamma }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_slab;
    use crate::spaces::build_spaces;
    use std::f64::consts::PI;

    fn pencil(n: usize, e1: f64, e2: f64) -> Pencil {
        let m = generate_rect_slab(PI, PI, PI / 2.0, n, n).unwrap();
        let s = build_spaces(&m).unwrap();
        Pencil::new(&PencilMatrices::assemble(&m, &s, e1, e2).unwrap()).unwrap()
    }

    #[test]
    fn exclusion_interval_values() {
        let x = exclusion_interval(1.0, 4.0);
        assert_eq!(x.delta, 1.5);
        assert!((x.lower - 0.5).abs() < 1e-15);
        assert!((x.upper - (18.25f64.sqrt() + 1.5) / 2.0).abs() < 1e-15);
        assert!((x.upper - 2.8860).abs() < 1e-4);
        let h = exclusion_interval(3.0, 3.0);
        assert!((h.lower - 3f64.sqrt()).abs() < 1e-15 && (h.upper - 3f64.sqrt()).abs() < 1e-15);
        let u = exclusion_interval(1.0, 1.0);
        assert_eq!((u.lower, u.upper), (1.0, 1.0));
        let r = exclusion_interval(4.0, 1.0);
        assert_eq!((r.lower, r.upper), (x.lower, x.upper));
        assert_eq!(r.delta, -1.5);
    }

    #[test]
    fn coefficients_for_one_and_four() {
        let m = generate_rect_slab(PI, PI, PI / 2.0, 3, 3).unwrap();
        let s = build_spaces(&m).unwrap();
        let pm = PencilMatrices::assemble(&m, &s, 1.0, 4.0).unwrap();
        let p = Pencil::new(&pm).unwrap();
        assert_eq!(p.c0, (&pm.k - &pm.a2) * 4.0);
        assert_eq!(p.c2, &pm.a1 - &pm.k * 5.0);
        assert_eq!(p.c1, &pm.s * -3.0);
        assert_eq!(p.c3().amax(), 0.0);
    }

    #[test]
    fn equal_permittivities_drop_odd_term() {
        let p = pencil(4, 2.0, 2.0);
        assert_eq!(p.c1.amax(), 0.0);
        let g = Complex64::new(0.3, 0.8);
        assert_eq!(p.evaluate(g), p.evaluate(-g));
    }

    #[test]
    fn swapping_permittivities_flips_c1_only() {
        let a = pencil(3, 1.0, 4.0);
        let b = pencil(3, 4.0, 1.0);
        assert_eq!(a.c1, -&b.c1);
        // the even coefficients carry the permittivity of each region
        assert!((&a.c4 - &b.c4).norm() > 0.0);
    }

    #[test]
    fn evaluate_at_zero_is_c0() {
        let p = pencil(3, 1.0, 4.0);
        assert_eq!(
            p.evaluate(Complex64::new(0.0, 0.0)),
            p.c0.map(|x| Complex64::new(x, 0.0))
        );
    }

    #[test]
    fn homogeneous_degeneration_points_annihilate() {
        let p = pencil(6, 2.0, 2.0);
        for g in [2f64.sqrt(), -(2f64.sqrt())] {
            let l = p.evaluate(Complex64::new(g, 0.0));
            assert!(l.norm() <= 1e-12 * p.max_coefficient_norm(), "{}", l.norm());
        }
    }

    #[test]
    fn residual_is_scale_invariant_and_rejects_zero() {
        let p = pencil(3, 1.0, 4.0);
        let g = Complex64::new(0.4, -1.1);
        let v = DVector::from_fn(p.dim(), |i, _| Complex64::new((i as f64).cos(), 0.5));
        let r1 = p.residual(g, &v).unwrap();
        let r2 = p.residual(g, &(v.clone() * Complex64::new(2.0, 0.0))).unwrap();
        let r3 = p.residual(g, &(v.clone() * Complex64::from_polar(1.0, 0.7))).unwrap();
        assert!((r1 - r2).abs() <= 1e-15 * r1);
        assert!((r1 - r3).abs() <= 1e-14 * r1);
        assert!(r1 > 1e-3);
        let zero = DVector::zeros(p.dim());
        assert!(matches!(p.residual(g, &zero), Err(Error::ZeroVector)));
    }

    #[test]
    fn apply_matches_evaluate() {
        let p = pencil(3, 1.0, 4.0);
        let g = Complex64::new(-0.7, 0.2);
        let v = DVector::from_fn(p.dim(), |i, _| Complex64::new(1.0 + i as f64, -(i as f64)));
        let a = p.apply(g, &v);
        let b = p.evaluate(g) * &v;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn both_linearizations_reproduce_det_zero() {
        let p = pencil(2, 1.0, 4.0);
        // 3×3 nodes: one Π and eight Ψ coordinates
        assert_eq!(p.dim(), 9);
        for c in [p.linearize().unwrap(), p.linearize_squared().unwrap()] {
            let eig = c.matrix.complex_eigenvalues();
            for lam in eig.iter().take(6) {
                for g in c.gammas(*lam) {
                    let l = p.evaluate(g);
                    let smallest = l.singular_values().min();
                    assert!(smallest <= 1e-9 * p.scale_at(g), "{g} {smallest:e}");
                }
            }
        }
    }

    #[test]
    fn non_positive_k_is_reported() {
        let mut p = pencil(2, 1.0, 1.0);
        p.c4[(0, 0)] = -p.c4[(0, 0)];
        assert!(matches!(p.linearize(), Err(Error::NotPositiveDefinite("K"))));
    }
}

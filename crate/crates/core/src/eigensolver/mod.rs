//! Dense eigensolver for the companion linearization of the pencil.
//!
//! The companion is balanced, reduced to Hessenberg form with Householder
//! reflectors and handed to a complex single-shift QR iteration.
//! Eigenvectors come from inverse iteration on the Hessenberg matrix,
//! mapped back through the reflectors and the balancing scale.

pub mod balance;
pub mod hessenberg;
pub mod inverse;
pub mod qr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pencil::{Companion, Pencil};

/// Largest companion dimension the dense solver accepts.
pub const DIMENSION_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// `2n` companion in `γ²`.
    Squared,
    /// `4n` companion in `γ`.
    Full,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub route: Route,
    pub balance: bool,
    pub max_sweeps: usize,
    /// Compute eigenvectors and residuals.
    pub vectors: bool,
    /// Only compute vectors for `|γ|` up to this radius.
    pub vector_radius: Option<f64>,
    /// Residual above which a pair is flagged unconverged.
    pub residual_tol: f64,
    pub dimension_cap: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            route: Route::Squared,
            balance: true,
            max_sweeps: qr::DEFAULT_MAX_SWEEPS,
            vectors: false,
            vector_radius: None,
            residual_tol: 1e-8,
            dimension_cap: DIMENSION_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    /// All `4n` pencil eigenvalues.
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm pencil eigenvectors, where computed.
    pub vectors: Vec<Option<DVector<Complex64>>>,
    /// Pencil residuals of the computed vectors.
    pub residuals: Vec<Option<f64>>,
    /// QR convergence and, where a vector was computed, residual within
    /// tolerance.
    pub converged: Vec<bool>,
    /// Total QR sweeps.
    pub iterations: usize,
    pub companion_dim: usize,
    pub route: Route,
}

impl EigenReport {
    pub fn unconverged(&self) -> usize {
        self.converged.iter().filter(|c| !**c).count()
    }
}

/// Eigenvalues of a real square matrix, optionally with an inverse-iteration
/// eigenvector for each.
pub struct DenseEigen {
    pub eigenvalues: Vec<Complex64>,
    pub converged: Vec<bool>,
    pub sweeps: usize,
    reduction: hessenberg::HessenbergReduction,
    scaling: balance::Scaling,
    rows: Option<inverse::HessenbergRows>,
}

impl DenseEigen {
    pub fn new(a: &DMatrix<f64>, balance_first: bool, max_sweeps: usize) -> Self {
        let (b, scaling) = if balance_first {
            balance::balance(a)
        } else {
            (a.clone(), balance::Scaling::identity(a.nrows()))
        };
        let reduction = hessenberg::reduce(&b);
        drop(b);
        let hc = reduction.h.map(|x| Complex64::new(x, 0.0));
        let out = qr::qr_eigenvalues(&hc, max_sweeps);
        Self {
            eigenvalues: out.eigenvalues,
            converged: out.converged,
            sweeps: out.sweeps,
            reduction,
            scaling,
            rows: None,
        }
    }

    /// Eigenvector of the original matrix for `lambda`, unit norm.
    pub fn eigenvector(&mut self, lambda: Complex64) -> Vec<Complex64> {
        let rows = self
            .rows
            .get_or_insert_with(|| inverse::HessenbergRows::new(&self.reduction.h));
        let (mut x, _) = rows.eigenvector(lambda, 2);
        self.reduction.apply_q(&mut x);
        self.scaling.unscale(&mut x);
        let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for z in &mut x {
                *z /= nrm;
            }
        }
        x
    }
}

fn normalize(v: &mut DVector<Complex64>) {
    let n = v.norm();
    if n > 0.0 {
        *v /= Complex64::new(n, 0.0);
    }
}

/// Full spectrum of the pencil through its companion linearization.
pub fn solve_pencil(pencil: &Pencil, opts: &EigenOptions) -> Result<EigenReport> {
    let companion_dim = match opts.route {
        Route::Squared => 2 * pencil.dim(),
        Route::Full => 4 * pencil.dim(),
    };
    if companion_dim > opts.dimension_cap {
        return Err(Error::DimensionCap {
            dim: companion_dim,
            cap: opts.dimension_cap,
        });
    }
    let companion: Companion = match opts.route {
        Route::Squared => pencil.linearize_squared()?,
        Route::Full => pencil.linearize()?,
    };
    let mut dense = DenseEigen::new(&companion.matrix, opts.balance, opts.max_sweeps);

    let mut eigenvalues = Vec::with_capacity(4 * pencil.dim());
    let mut vectors = Vec::with_capacity(4 * pencil.dim());
    let mut residuals = Vec::with_capacity(4 * pencil.dim());
    let mut converged = Vec::with_capacity(4 * pencil.dim());
    let lambdas = dense.eigenvalues.clone();
    for (idx, &lam) in lambdas.iter().enumerate() {
        let gammas = companion.gammas(lam);
        let want = opts.vectors && gammas.iter().any(|g| opts.vector_radius.is_none_or(|r| g.norm() <= r));
        let z = if want { Some(dense.eigenvector(lam)) } else { None };
        for g in gammas {
            eigenvalues.push(g);
            let mut ok = dense.converged[idx];
            match &z {
                Some(z) => {
                    let mut v = companion.pencil_vector(z, g);
                    normalize(&mut v);
                    let r = pencil.residual(g, &v).unwrap_or(f64::INFINITY);
                    ok &= r <= opts.residual_tol;
                    residuals.push(Some(r));
                    vectors.push(Some(v));
                }
                None => {
                    residuals.push(None);
                    vectors.push(None);
                }
            }
            converged.push(ok);
        }
    }
    Ok(EigenReport {
        eigenvalues,
        vectors,
        residuals,
        converged,
        iterations: dense.sweeps,
        companion_dim,
        route: opts.route,
    })
}

/// Vectors recovered directly from `L(γ)`.
#[derive(Debug, Clone)]
pub struct PencilVectors {
    pub vectors: Vec<DVector<Complex64>>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Inverse iteration on `L(γ + δ)` with a tiny complex offset `δ`.
///
/// With `null_cap = 1` a single unit vector is returned. With a larger cap
/// a block of that many random starts is iterated and orthonormalized, and
/// every direction whose residual is within `tol` is kept; at a
/// degeneration point this yields a basis of the numerical null space.
pub fn eigenvector(pencil: &Pencil, gamma: Complex64, null_cap: usize, tol: f64) -> Result<PencilVectors> {
    let n = pencil.dim();
    let cap = null_cap.clamp(1, n);
    let delta = Complex64::new(1.0, 1.0) * (1e-12 * (1.0 + gamma.norm()) / std::f64::consts::SQRT_2);
    let lu = pencil.evaluate(gamma + delta).lu();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block = DMatrix::<Complex64>::from_fn(n, cap, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut stagnated = false;
    for _ in 0..3 {
        let Some(next) = lu.solve(&block) else {
            stagnated = true;
            break;
        };
        if !next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            stagnated = true;
            break;
        }
        block = next.qr().q();
    }
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    for j in 0..block.ncols() {
        let v = block.column(j).into_owned();
        let r = pencil.residual(gamma, &v)?;
        if vectors.is_empty() || r <= tol {
            vectors.push(v);
            residuals.push(r);
        }
    }
    // best vector first
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]));
    let vectors: Vec<_> = order.iter().map(|&i| vectors[i].clone()).collect();
    let residuals: Vec<_> = order.iter().map(|&i| residuals[i]).collect();
    let converged = !stagnated && residuals[0] <= tol;
    Ok(PencilVectors {
        vectors,
        residuals,
        converged,
    })
}

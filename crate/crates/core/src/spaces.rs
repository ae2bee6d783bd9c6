//! Discrete product space for `(Π, Ψ)` with linear nodal elements.
//!
//! `Π` vanishes on the shield `Γ₀` and on both sides of the slit `Γ′`;
//! its coordinates are the values at the remaining nodes. `Ψ` lives on all
//! nodes subject to `∫Ψ dx = 0`, parametrized through an orthonormal basis
//! of the complement of the mean functional built from one Householder
//! reflector.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::mesh::{EdgeTag, Mesh};

/// Orthonormal basis `N` (nodes × nodes−1) of `{ψ : meanᵀψ = 0}`, stored as
/// the Householder reflector `H = I − β u uᵀ` whose first column is
/// parallel to the mean vector; `N` is `H` without that column.
#[derive(Debug, Clone)]
pub struct ZeroMeanBasis {
    u: DVector<f64>,
    beta: f64,
}

impl ZeroMeanBasis {
    pub fn new(mean: &DVector<f64>) -> Result<Self> {
        let norm = mean.norm();
        if mean.len() < 2 || norm == 0.0 || !norm.is_finite() {
            return Err(Error::UnderResolved(
                "mean functional is degenerate; the zero-mean space is empty".into(),
            ));
        }
        let mut u = mean / norm;
        let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
        u[0] += sign;
        let beta = 2.0 / u.norm_squared();
        Ok(Self { u, beta })
    }

    /// Number of nodal values.
    pub fn nodal_dim(&self) -> usize {
        self.u.len()
    }

    /// Number of zero-mean coordinates.
    pub fn dim(&self) -> usize {
        self.u.len() - 1
    }

    /// Nodal values `N y`.
    pub fn apply<T>(&self, y: &[T]) -> Vec<T>
    where
        T: nalgebra::ComplexField<RealField = f64> + Copy,
    {
        assert_eq!(y.len(), self.dim());
        // x = H [0; y] = [0; y] − β u (uᵀ[0; y])
        let mut x = Vec::with_capacity(self.nodal_dim());
        x.push(T::zero());
        x.extend_from_slice(y);
        let mut dot = T::zero();
        for (xi, &ui) in x.iter().zip(self.u.iter()) {
            dot += xi.scale(ui);
        }
        let s = dot.scale(self.beta);
        for (xi, &ui) in x.iter_mut().zip(self.u.iter()) {
            *xi -= s.scale(ui);
        }
        x
    }

    /// Coordinates `Nᵀ x`.
    pub fn apply_transpose<T>(&self, x: &[T]) -> Vec<T>
    where
        T: nalgebra::ComplexField<RealField = f64> + Copy,
    {
        assert_eq!(x.len(), self.nodal_dim());
        let mut dot = T::zero();
        for (&xi, &ui) in x.iter().zip(self.u.iter()) {
            dot += xi.scale(ui);
        }
        let s = dot.scale(self.beta);
        x.iter()
            .zip(self.u.iter())
            .skip(1)
            .map(|(&xi, &ui)| xi - s.scale(ui))
            .collect()
    }

    /// Dense `N`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.nodal_dim();
        DMatrix::from_fn(n, n - 1, |i, j| {
            let delta = if i == j + 1 { 1.0 } else { 0.0 };
            delta - self.beta * self.u[i] * self.u[j + 1]
        })
    }

    /// `Nᵀ A` for a nodal-row matrix `A` (nodes × k).
    pub fn reduce_rows(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.nodal_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.nodal_dim(),
                found: a.nrows(),
            });
        }
        let ut_a = a.tr_mul(&self.u);
        let n = self.nodal_dim();
        Ok(DMatrix::from_fn(n - 1, a.ncols(), |i, j| {
            a[(i + 1, j)] - self.beta * self.u[i + 1] * ut_a[j]
        }))
    }

    /// `Nᵀ M N` for a symmetric nodal matrix `M`. The result is symmetric
    /// bit for bit: entry `(i, j)` and `(j, i)` come from one evaluation.
    pub fn reduce(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.nodal_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
        // H M H = M − β u zᵀ − β w uᵀ + β² c u uᵀ, with w = M u, z = Mᵀ u, c = uᵀ M u
        let w = m * &self.u;
        let z = m.tr_mul(&self.u);
        let c = self.u.dot(&w);
        let (b, u) = (self.beta, &self.u);
        let mut r = DMatrix::zeros(n - 1, n - 1);
        for j in 0..n - 1 {
            for i in 0..=j {
                let (p, q) = (i + 1, j + 1);
                let v = m[(p, q)] - b * u[p] * z[q] - b * w[p] * u[q] + b * b * c * u[p] * u[q];
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        Ok(r)
    }
}

/// Degree-of-freedom maps and the Gram matrix of the gradient inner product.
#[derive(Debug, Clone)]
pub struct FieldSpaces {
    /// Π coordinate of each mesh node, `None` on `Γ₀` and `Γ′`.
    pub pi_dofs: Vec<Option<usize>>,
    /// Mesh node of each Π coordinate.
    pub pi_nodes: Vec<usize>,
    /// `∫ φᵢ dx` for every node.
    pub mean: DVector<f64>,
    pub null_basis: ZeroMeanBasis,
    /// `diag(G_Π, Nᵀ G N)`.
    pub gram: DMatrix<f64>,
}

impl FieldSpaces {
    pub fn dim_pi(&self) -> usize {
        self.pi_nodes.len()
    }

    pub fn dim_psi(&self) -> usize {
        self.null_basis.dim()
    }

    pub fn dim(&self) -> usize {
        self.dim_pi() + self.dim_psi()
    }

    pub fn num_nodes(&self) -> usize {
        self.pi_dofs.len()
    }

    /// Restrict a nodal matrix to Π rows and columns.
    pub fn restrict_pi(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.pi_nodes;
        DMatrix::from_fn(p.len(), p.len(), |i, j| m[(p[i], p[j])])
    }

    /// Reduce a symmetric nodal matrix to zero-mean Ψ coordinates.
    pub fn zero_mean_transform(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.null_basis.reduce(m)
    }

    /// Split a product-space vector into nodal `(Π, Ψ)` values.
    pub fn to_nodal<T>(&self, x: &[T]) -> (Vec<T>, Vec<T>)
    where
        T: nalgebra::ComplexField<RealField = f64> + Copy,
    {
        assert_eq!(x.len(), self.dim());
        let mut pi = vec![T::zero(); self.num_nodes()];
        for (k, &node) in self.pi_nodes.iter().enumerate() {
            pi[node] = x[k];
        }
        let psi = self.null_basis.apply(&x[self.dim_pi()..]);
        (pi, psi)
    }

    /// Product-space coordinates of nodal `(Π, Ψ)`; Π values on eliminated
    /// nodes are dropped and the mean of Ψ is projected out.
    pub fn from_nodal<T>(&self, pi: &[T], psi: &[T]) -> Vec<T>
    where
        T: nalgebra::ComplexField<RealField = f64> + Copy,
    {
        let mut x: Vec<T> = self.pi_nodes.iter().map(|&n| pi[n]).collect();
        x.extend(self.null_basis.apply_transpose(psi));
        x
    }
}

/// Per-node integral of the basis functions.
pub fn mean_vector(mesh: &Mesh) -> DVector<f64> {
    let mut m = DVector::zeros(mesh.num_nodes());
    for t in 0..mesh.triangles.len() {
        let a = mesh.signed_area(t) / 3.0;
        for &v in &mesh.triangles[t].nodes {
            m[v] += a;
        }
    }
    m
}

pub(crate) fn densify(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

pub fn build_spaces(mesh: &Mesh) -> Result<FieldSpaces> {
    let mut eliminated = mesh.nodes_on(EdgeTag::Gamma0);
    for (e, s) in eliminated.iter_mut().zip(mesh.nodes_on(EdgeTag::GammaPrime)) {
        *e |= s;
    }
    let mut pi_dofs = vec![None; mesh.num_nodes()];
    let mut pi_nodes = Vec::new();
    for (v, &gone) in eliminated.iter().enumerate() {
        if !gone {
            pi_dofs[v] = Some(pi_nodes.len());
            pi_nodes.push(v);
        }
    }
    if pi_nodes.is_empty() {
        return Err(Error::UnderResolved(
            "every node lies on the shield; no interior degrees of freedom remain".into(),
        ));
    }
    let mean = mean_vector(mesh);
    let null_basis = ZeroMeanBasis::new(&mean)?;
    let stiff = crate::assembly::stiffness(mesh, |_| 1.0);

    let mut spaces = FieldSpaces {
        pi_dofs,
        pi_nodes,
        mean,
        null_basis,
        gram: DMatrix::zeros(0, 0),
    };
    let g_pi = spaces.restrict_pi(&stiff);
    let g_psi = spaces.zero_mean_transform(&stiff)?;
    spaces.gram = block_diag(&g_pi, &g_psi);
    Ok(spaces)
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

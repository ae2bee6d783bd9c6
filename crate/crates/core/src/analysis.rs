//! Classification of computed spectra, discrete checks of the structural
//! properties of the pencil, and reconstruction of transverse fields.
//!
//! The spectrum is classified against the exclusion interval `I₀` and the
//! degeneration points `±√εᵢ`. Symmetry partners under `γ ↦ −γ`, `γ̄`, `−γ̄`
//! are found by greedy nearest matching, so that each eigenvalue is used at
//! most once per map.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::PencilMatrices;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Region};
use crate::output::{complex_17, f64_17, opt_f64_17};
use crate::pencil::{transverse_wavenumber_sq, ExclusionInterval, Pencil};

/// Default relative classification tolerance.
pub const CLASSIFICATION_TOL: f64 = 1e-6;

/// Relative tolerance of the symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WaveClass {
    Propagating,
    Evanescent,
    Complex,
    DegenerationAdjacent,
    InExclusion,
}

impl WaveClass {
    pub const ALL: [WaveClass; 5] = [
        WaveClass::Propagating,
        WaveClass::Evanescent,
        WaveClass::Complex,
        WaveClass::DegenerationAdjacent,
        WaveClass::InExclusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WaveClass::Propagating => "PROPAGATING",
            WaveClass::Evanescent => "EVANESCENT",
            WaveClass::Complex => "COMPLEX",
            WaveClass::DegenerationAdjacent => "DEGENERATION_ADJACENT",
            WaveClass::InExclusion => "IN_EXCLUSION",
        }
    }
}

/// Classify one eigenvalue. Proximity to a degeneration point wins over
/// everything else; a real value is then either inside `I₀` or
/// propagating.
pub fn classify(gamma: Complex64, exclusion: &ExclusionInterval, tol: f64) -> WaveClass {
    for g in exclusion.degeneration_points() {
        let near = |s: f64| (gamma - Complex64::new(s * g, 0.0)).norm() <= tol * (1.0 + g);
        if near(1.0) || near(-1.0) {
            return WaveClass::DegenerationAdjacent;
        }
    }
    let slack = tol * (1.0 + gamma.norm());
    if gamma.im.abs() <= slack {
        if exclusion.contains_abs(gamma.re) {
            WaveClass::InExclusion
        } else {
            WaveClass::Propagating
        }
    } else if gamma.re.abs() <= slack {
        WaveClass::Evanescent
    } else {
        WaveClass::Complex
    }
}

/// The three reflections of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMap {
    Negate,
    Conjugate,
    NegateConjugate,
}

impl SymmetryMap {
    pub const ALL: [SymmetryMap; 3] = [
        SymmetryMap::Negate,
        SymmetryMap::Conjugate,
        SymmetryMap::NegateConjugate,
    ];

    pub fn apply(self, z: Complex64) -> Complex64 {
        match self {
            SymmetryMap::Negate => -z,
            SymmetryMap::Conjugate => z.conj(),
            SymmetryMap::NegateConjugate => -z.conj(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SymmetryMap::Negate => "negate",
            SymmetryMap::Conjugate => "conjugate",
            SymmetryMap::NegateConjugate => "negate_conjugate",
        }
    }
}

/// Partners of each eigenvalue under the three maps, with relative
/// mismatches `|γ_partner − f(γ)| / (1 + |γ|)`.
#[derive(Debug, Clone)]
pub struct PairingReport {
    /// `partners[i][k]` is the partner of `i` under `SymmetryMap::ALL[k]`.
    pub partners: Vec<[Option<usize>; 3]>,
    pub mismatch: Vec<[f64; 3]>,
    /// Largest mismatch per map.
    pub max_mismatch: [f64; 3],
    pub tol: f64,
    /// Entries whose partner under some map is missing or beyond `tol`.
    pub violations: Vec<usize>,
}

impl PairingReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn overall_max(&self) -> f64 {
        self.max_mismatch.iter().cloned().fold(0.0, f64::max)
    }

    /// Whether `i` together with its three partners forms four distinct
    /// entries, each within tolerance.
    pub fn full_quadruple(&self, i: usize) -> bool {
        let p = self.partners[i];
        let ok = (0..3).all(|k| p[k].is_some() && self.mismatch[i][k] <= self.tol);
        if !ok {
            return false;
        }
        let mut ids = [i, p[0].unwrap(), p[1].unwrap(), p[2].unwrap()];
        ids.sort_unstable();
        ids.windows(2).all(|w| w[0] != w[1])
    }
}

/// Involutive greedy matching of the multiset `gammas` with its image under
/// `map`. Each eigenvalue is matched to the nearest still-unmatched entry
/// near its image; the relation is symmetric because the maps are
/// isometric involutions.
fn match_under(gammas: &[Complex64], map: SymmetryMap, tol: f64) -> (Vec<Option<usize>>, Vec<f64>) {
    let n = gammas.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| gammas[a].re.total_cmp(&gammas[b].re));
    let keys: Vec<f64> = order.iter().map(|&i| gammas[i].re).collect();
    let mut partner = vec![None; n];
    let mut mismatch = vec![f64::INFINITY; n];
    for i in 0..n {
        if partner[i].is_some() {
            continue;
        }
        let target = map.apply(gammas[i]);
        let radius = tol * (1.0 + gammas[i].norm());
        let lo = keys.partition_point(|&x| x < target.re - radius);
        let hi = keys.partition_point(|&x| x <= target.re + radius);
        let nearest = |range: &mut dyn Iterator<Item = usize>| {
            range
                .filter(|&j| partner[j].is_none())
                .map(|j| (j, (gammas[j] - target).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        };
        let mut best = nearest(&mut order[lo..hi].iter().copied());
        if best.is_none_or(|(_, d)| d > radius) {
            best = nearest(&mut (0..n));
        }
        if let Some((j, d)) = best {
            let rel = d / (1.0 + gammas[i].norm());
            partner[i] = Some(j);
            partner[j] = Some(i);
            mismatch[i] = rel;
            mismatch[j] = rel;
        }
    }
    (partner, mismatch)
}

/// Match every eigenvalue with its images under `γ ↦ −γ, γ̄, −γ̄`.
pub fn symmetry_pairing(gammas: &[Complex64], tol: f64) -> PairingReport {
    let n = gammas.len();
    let mut partners = vec![[None; 3]; n];
    let mut mismatch = vec![[f64::INFINITY; 3]; n];
    let mut max_mismatch = [0.0f64; 3];
    for (k, map) in SymmetryMap::ALL.into_iter().enumerate() {
        let (p, m) = match_under(gammas, map, tol);
        for i in 0..n {
            partners[i][k] = p[i];
            mismatch[i][k] = m[i];
            max_mismatch[k] = max_mismatch[k].max(m[i]);
        }
    }
    let violations = (0..n)
        .filter(|&i| (0..3).any(|k| partners[i][k].is_none() || mismatch[i][k] > tol))
        .collect();
    PairingReport {
        partners,
        mismatch,
        max_mismatch,
        tol,
        violations,
    }
}

/// A group of eigenvalues chained together within `tol·(1+|γ|)`.
#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    #[serde(serialize_with = "f64_17")]
    pub diameter: f64,
}

/// Single-linkage clusters of size two or more. A tight cluster may be a
/// multiple eigenvalue or a defective one; no Jordan structure is inferred.
pub fn clusters(gammas: &[Complex64], tol: f64) -> Vec<Cluster> {
    let n = gammas.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| gammas[a].re.total_cmp(&gammas[b].re));
    for (pos, &i) in order.iter().enumerate() {
        let r = tol * (1.0 + gammas[i].norm());
        for &j in &order[pos + 1..] {
            if gammas[j].re - gammas[i].re > r {
                break;
            }
            if (gammas[j] - gammas[i]).norm() <= r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups
        .into_values()
        .filter(|g| g.len() > 1)
        .map(|members| {
            let mut diameter = 0.0f64;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    diameter = diameter.max((gammas[i] - gammas[j]).norm());
                }
            }
            Cluster { members, diameter }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEntry {
    #[serde(serialize_with = "complex_17")]
    pub gamma: Complex64,
    #[serde(serialize_with = "opt_f64_17")]
    pub residual: Option<f64>,
    pub class: WaveClass,
    /// Partners under `−γ`, `γ̄`, `−γ̄`.
    pub partners: [Option<usize>; 3],
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClassCounts {
    pub propagating: usize,
    pub evanescent: usize,
    pub complex: usize,
    pub degeneration_adjacent: usize,
    pub in_exclusion: usize,
}

impl ClassCounts {
    pub fn get(&self, class: WaveClass) -> usize {
        match class {
            WaveClass::Propagating => self.propagating,
            WaveClass::Evanescent => self.evanescent,
            WaveClass::Complex => self.complex,
            WaveClass::DegenerationAdjacent => self.degeneration_adjacent,
            WaveClass::InExclusion => self.in_exclusion,
        }
    }

    fn bump(&mut self, class: WaveClass) {
        *match class {
            WaveClass::Propagating => &mut self.propagating,
            WaveClass::Evanescent => &mut self.evanescent,
            WaveClass::Complex => &mut self.complex,
            WaveClass::DegenerationAdjacent => &mut self.degeneration_adjacent,
            WaveClass::InExclusion => &mut self.in_exclusion,
        } += 1;
    }
}

/// A classified spectrum. Entries are sorted by `(Re γ, Im γ)`.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub entries: Vec<SpectrumEntry>,
    pub exclusion: ExclusionInterval,
    pub counts: ClassCounts,
    #[serde(serialize_with = "f64_17")]
    pub max_abs_re: f64,
    #[serde(serialize_with = "f64_17")]
    pub classification_tol: f64,
    #[serde(serialize_with = "f64_17")]
    pub symmetry_tol: f64,
    #[serde(serialize_with = "f64_17")]
    pub max_symmetry_mismatch: f64,
    pub clusters: Vec<Cluster>,
}

impl Spectrum {
    /// Classify and pair `gammas`, with optional residuals in the same
    /// order.
    pub fn new(
        gammas: &[Complex64],
        residuals: Option<&[Option<f64>]>,
        exclusion: ExclusionInterval,
        classification_tol: f64,
        symmetry_tol: f64,
    ) -> Self {
        let mut order: Vec<usize> = (0..gammas.len()).collect();
        order.sort_by(|&a, &b| {
            gammas[a]
                .re
                .total_cmp(&gammas[b].re)
                .then(gammas[a].im.total_cmp(&gammas[b].im))
        });
        let sorted: Vec<Complex64> = order.iter().map(|&i| gammas[i]).collect();
        let pairing = symmetry_pairing(&sorted, symmetry_tol);
        let mut counts = ClassCounts::default();
        let entries: Vec<SpectrumEntry> = order
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let class = classify(sorted[k], &exclusion, classification_tol);
                counts.bump(class);
                SpectrumEntry {
                    gamma: sorted[k],
                    residual: residuals.and_then(|r| r[i]),
                    class,
                    partners: pairing.partners[k],
                }
            })
            .collect();
        let max_abs_re = sorted.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        Self {
            entries,
            exclusion,
            counts,
            max_abs_re,
            classification_tol,
            symmetry_tol,
            max_symmetry_mismatch: pairing.overall_max(),
            clusters: clusters(&sorted, classification_tol),
        }
    }

    pub fn gammas(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.gamma).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairing(&self) -> PairingReport {
        symmetry_pairing(&self.gammas(), self.symmetry_tol)
    }

    /// Real eigenvalues outside `I₀`.
    pub fn real_outside_exclusion(&self) -> usize {
        self.counts.propagating
    }

    /// Eigenvalues with `|γ| ≤ radius`, not counting those within `margin`
    /// of the real segments `±[lower, upper]`.
    pub fn count_in_disk(&self, radius: f64, margin: f64) -> usize {
        let ex = &self.exclusion;
        self.entries
            .iter()
            .filter(|e| {
                let g = e.gamma;
                let a = g.re.abs();
                let dx = if a < ex.lower {
                    ex.lower - a
                } else if a > ex.upper {
                    a - ex.upper
                } else {
                    0.0
                };
                g.norm() <= radius && dx.hypot(g.im) > margin
            })
            .count()
    }

    /// Entry nearest to `target`.
    pub fn nearest(&self, target: Complex64) -> Option<&SpectrumEntry> {
        self.entries
            .iter()
            .min_by(|a, b| (a.gamma - target).norm().total_cmp(&(b.gamma - target).norm()))
    }
}

/// Numerical nullity of a real symmetric matrix: eigenvalues with
/// magnitude below `threshold`.
pub fn symmetric_nullity(m: &DMatrix<f64>, threshold: f64) -> usize {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .filter(|l| l.abs() < threshold)
        .count()
}

#[derive(Debug, Clone, Serialize)]
pub struct NullityRow {
    pub dim: usize,
    #[serde(serialize_with = "f64_17")]
    pub gamma: f64,
    pub nullity: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegenerationScan {
    pub rows: Vec<NullityRow>,
    /// Nullity at each degeneration point never drops from one level to
    /// the next.
    pub nondecreasing: bool,
}

/// Nullity of `L(±√εᵢ)` at each refinement level, levels ordered coarse to
/// fine. The threshold is `rel · Σ|γ|ᵏ‖Cₖ‖`, which stays meaningful when
/// `L(γ)` vanishes outright.
pub fn degeneration_scan(levels: &[&Pencil], rel: f64) -> DegenerationScan {
    let mut points: Vec<f64> = Vec::new();
    if let Some(first) = levels.first() {
        for g in first.exclusion().degeneration_points() {
            for s in [g, -g] {
                if !points.contains(&s) {
                    points.push(s);
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut nondecreasing = true;
    for &g in &points {
        let mut prev: Option<usize> = None;
        for p in levels {
            let threshold = rel * p.scale_at(Complex64::new(g, 0.0));
            let nullity = symmetric_nullity(&p.evaluate_real(g), threshold);
            if prev.is_some_and(|q| nullity < q) {
                nondecreasing = false;
            }
            prev = Some(nullity);
            rows.push(NullityRow {
                dim: p.dim(),
                gamma: g,
                nullity,
            });
        }
    }
    DegenerationScan { rows, nondecreasing }
}

/// Piecewise-constant transverse field on one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseField {
    #[serde(serialize_with = "complex_17")]
    pub e1: Complex64,
    #[serde(serialize_with = "complex_17")]
    pub e2: Complex64,
    #[serde(serialize_with = "complex_17")]
    pub h1: Complex64,
    #[serde(serialize_with = "complex_17")]
    pub h2: Complex64,
}

/// Transverse components from the longitudinal fields `Π = E₃` and
/// `Ψ = H₃`, given as nodal values:
///
/// ```text
/// E₁ = i/k̃² (γ ∂₁Π − ∂₂Ψ)     H₁ = i/k̃² (ε ∂₂Π + γ ∂₁Ψ)
/// E₂ = i/k̃² (γ ∂₂Π + ∂₁Ψ)     H₂ = i/k̃² (−ε ∂₁Π + γ ∂₂Ψ)
/// ```
///
/// with `k̃² = ε − γ²` on each region. Refused when `|γ² − εⱼ| ≤ tol·(1+εⱼ)`
/// for a region present in the mesh.
pub fn transverse_fields(
    mesh: &Mesh,
    pi: &[Complex64],
    psi: &[Complex64],
    gamma: Complex64,
    eps1: f64,
    eps2: f64,
    tol: f64,
) -> Result<Vec<TransverseField>> {
    let n = mesh.num_nodes();
    for v in [pi, psi] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    let eps_of = |r: Region| match r {
        Region::One => eps1,
        Region::Two => eps2,
    };
    let g2 = gamma * gamma;
    for r in [Region::One, Region::Two] {
        if mesh.triangles.iter().any(|t| t.region == r) {
            let e = eps_of(r);
            if (g2 - e).norm() <= tol * (1.0 + e) {
                return Err(Error::Degeneration {
                    gamma_sq: format!("{g2}"),
                    eps: e,
                    tol,
                });
            }
        }
    }
    let i = Complex64::new(0.0, 1.0);
    Ok((0..mesh.triangles.len())
        .map(|t| {
            let tri = &mesh.triangles[t];
            let geo = mesh.element(t);
            let mut dpi = [Complex64::new(0.0, 0.0); 2];
            let mut dpsi = [Complex64::new(0.0, 0.0); 2];
            for (a, &node) in tri.nodes.iter().enumerate() {
                for d in 0..2 {
                    dpi[d] += pi[node] * geo.grad[a][d];
                    dpsi[d] += psi[node] * geo.grad[a][d];
                }
            }
            let eps = eps_of(tri.region);
            let f = i / transverse_wavenumber_sq(eps, gamma);
            TransverseField {
                e1: f * (gamma * dpi[0] - dpsi[1]),
                e2: f * (gamma * dpi[1] + dpsi[0]),
                h1: f * (dpi[1] * eps + gamma * dpsi[0]),
                h2: f * (-dpi[0] * eps + gamma * dpsi[1]),
            }
        })
        .collect())
}

/// Generalized eigenvalues of the symmetric pair `(m, g)` with `g` positive
/// definite, ascending.
pub fn generalized_eigenvalues(m: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(g.clone()).ok_or(Error::NotPositiveDefinite("G"))?;
    let l = chol.l();
    let x = l.solve_lower_triangular(m).ok_or(Error::NotPositiveDefinite("G"))?;
    let b = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite("G"))?;
    let b = (&b + b.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Least-squares slope of `log λₙ` against `log n` over the largest
/// `fraction` of the positive values, indexed `n = 1, 2, …` in decreasing
/// order.
pub fn decay_slope(values: &[f64], fraction: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let m = ((v.len() as f64) * fraction).round().max(2.0) as usize;
    let pts: Vec<(f64, f64)> = v
        .iter()
        .take(m)
        .enumerate()
        .map(|(k, &x)| (((k + 1) as f64).ln(), x.ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    num / den
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "f64_17")]
    pub margin: f64,
    #[serde(serialize_with = "f64_17")]
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `margin ≤ threshold`.
    pub fn at_most(name: impl Into<String>, margin: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            margin,
            threshold,
            pass: margin <= threshold,
        }
    }

    /// Passes when `margin ≥ threshold`.
    pub fn at_least(name: impl Into<String>, margin: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            margin,
            threshold,
            pass: margin >= threshold,
        }
    }

    pub fn failed(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            margin: f64::NAN,
            threshold: f64::NAN,
            pass: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl PropertyReport {
    pub fn new(checks: Vec<Check>) -> Self {
        Self {
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Thresholds used by [`verify_all`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub symmetry_abs: f64,
    pub bound_slack: f64,
    pub line_volume: f64,
    pub identity_rel: f64,
    pub identity_samples: usize,
    pub spectral_symmetry: f64,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            symmetry_abs: 1e-14,
            bound_slack: 1e-10,
            line_volume: 1e-12,
            identity_rel: 1e-13,
            identity_samples: 10,
            spectral_symmetry: SYMMETRY_TOL,
            residual_tol: 1e-8,
            seed: 7,
        }
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn range_check(report: &mut PropertyReport, name: &str, ev: &[f64], lo: f64, hi: f64) {
    let (min, max) = match (ev.first(), ev.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (lo, hi),
    };
    report.push(Check::at_least(format!("{name}_min"), min, lo));
    report.push(Check::at_most(format!("{name}_max"), max, hi));
}

fn conj_transpose(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.adjoint()
}

/// Pencil identities `L(γ)ᴴ = L(γ̄)` and `P L(γ) P = L(−γ)` at random
/// complex points. Returns the two largest relative errors.
pub fn pencil_identities(pencil: &Pencil, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let np = pencil.dim_pi;
    let (mut herm, mut flip) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let g = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let l = pencil.evaluate(g);
        let scale = l.norm().max(f64::MIN_POSITIVE);
        herm = herm.max((conj_transpose(&l) - pencil.evaluate(g.conj())).norm() / scale);
        let mut plp = l;
        let n = plp.nrows();
        for i in 0..n {
            for j in 0..n {
                if (i < np) != (j < np) {
                    plp[(i, j)] = -plp[(i, j)];
                }
            }
        }
        flip = flip.max((plp - pencil.evaluate(-g)).norm() / scale);
    }
    (herm, flip)
}

/// Run every structural check on the assembled forms, the pencil and,
/// when given, a computed spectrum.
pub fn verify_all(
    matrices: &PencilMatrices,
    pencil: &Pencil,
    spectrum: Option<&Spectrum>,
    opts: &VerifyOptions,
) -> PropertyReport {
    let mut report = PropertyReport::new(Vec::new());
    for (name, m) in [
        ("k_symmetric", &matrices.k),
        ("a1_symmetric", &matrices.a1),
        ("a2_symmetric", &matrices.a2),
        ("s_symmetric", &matrices.s),
    ] {
        report.push(Check::at_most(name, asymmetry(m), opts.symmetry_abs));
    }

    let k_pd = Cholesky::new(matrices.k.clone()).is_some();
    match generalized_eigenvalues(&matrices.k, &matrices.gram) {
        Ok(ev) => {
            let min = ev.first().cloned().unwrap_or(0.0);
            report.push(Check {
                name: "k_positive_definite".into(),
                margin: min,
                threshold: 0.0,
                pass: k_pd && min > 0.0,
            });
        }
        Err(_) => report.push(Check::failed("k_positive_definite")),
    }

    let slack = opts.bound_slack;
    let eps_max = matrices.eps_max();
    for (name, m, lo, hi) in [
        ("a1_rayleigh", &matrices.a1, 1.0, eps_max),
        ("a2_rayleigh", &matrices.a2, 1.0 / eps_max, 1.0),
        ("s_rayleigh", &matrices.s, -0.5, 0.5),
    ] {
        match generalized_eigenvalues(m, &matrices.gram) {
            Ok(ev) => range_check(&mut report, name, &ev, lo - slack, hi + slack),
            Err(_) => report.push(Check::failed(name)),
        }
    }

    if let Some(sv) = &matrices.s_volume {
        report.push(Check::at_most(
            "s_line_volume",
            (&matrices.s - sv).amax(),
            opts.line_volume,
        ));
    }

    let (herm, flip) = pencil_identities(pencil, opts.identity_samples, opts.seed);
    report.push(Check::at_most("pencil_adjoint", herm, opts.identity_rel));
    report.push(Check::at_most("pencil_flip", flip, opts.identity_rel));

    if let Some(sp) = spectrum {
        let pairing = sp.pairing();
        report.push(Check::at_most(
            "spectrum_fourfold",
            pairing.overall_max(),
            opts.spectral_symmetry,
        ));
        let incomplete = sp
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| e.class == WaveClass::Complex && !pairing.full_quadruple(*i))
            .count();
        report.push(Check::at_most("complex_quadruples", incomplete as f64, 0.0));
        if matrices.eps1 == matrices.eps2 {
            let worst = sp
                .entries
                .iter()
                .map(|e| {
                    let g2 = e.gamma * e.gamma;
                    g2.im.abs() / (1.0 + e.gamma.norm_sqr())
                })
                .fold(0.0, f64::max);
            report.push(Check::at_most(
                "homogeneous_real_gamma_sq",
                worst,
                opts.spectral_symmetry,
            ));
        }
        let worst = sp.entries.iter().filter_map(|e| e.residual).fold(0.0, f64::max);
        if sp.entries.iter().any(|e| e.residual.is_some()) {
            report.push(Check::at_most("eigenpair_residual", worst, opts.residual_tol));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_slab;
    use crate::pencil::exclusion_interval;
    use crate::spaces::build_spaces;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classify_examples() {
        let ex = exclusion_interval(1.0, 4.0);
        assert_eq!(classify(c(3.5, 0.0), &ex, 1e-6), WaveClass::Propagating);
        assert_eq!(classify(c(2.0, 0.0), &ex, 1e-6), WaveClass::DegenerationAdjacent);
        assert_eq!(classify(c(-1.0, 0.0), &ex, 1e-6), WaveClass::DegenerationAdjacent);
        assert_eq!(classify(c(0.3, 0.7), &ex, 1e-6), WaveClass::Complex);
        assert_eq!(classify(c(0.0, 1.2), &ex, 1e-6), WaveClass::Evanescent);
        assert_eq!(classify(c(1.5, 0.0), &ex, 1e-6), WaveClass::InExclusion);
        assert_eq!(classify(c(0.2, 0.0), &ex, 1e-6), WaveClass::Propagating);
    }

    #[test]
    fn classify_respects_tolerance() {
        let ex = exclusion_interval(1.0, 4.0);
        assert_eq!(classify(c(3.5, 1e-9), &ex, 1e-6), WaveClass::Propagating);
        assert_eq!(classify(c(3.5, 1e-3), &ex, 1e-6), WaveClass::Complex);
    }

    #[test]
    fn pairing_of_a_quadruple_and_a_real_pair() {
        let g = [
            c(1.0, 2.0),
            c(-1.0, 2.0),
            c(1.0, -2.0),
            c(-1.0, -2.0),
            c(3.0, 0.0),
            c(-3.0, 0.0),
        ];
        let r = symmetry_pairing(&g, 1e-8);
        assert!(r.passes());
        assert_eq!(r.partners[0], [Some(3), Some(2), Some(1)]);
        assert_eq!(r.partners[4], [Some(5), Some(4), Some(5)]);
        assert!(r.full_quadruple(0));
        assert!(!r.full_quadruple(4));
    }

    #[test]
    fn pairing_flags_a_missing_partner() {
        let g = [c(1.0, 2.0), c(-1.0, 2.0), c(1.0, -2.0)];
        let r = symmetry_pairing(&g, 1e-8);
        assert!(!r.passes());
        assert!(r.violations.contains(&0));
    }

    #[test]
    fn pairing_is_a_matching_on_multisets() {
        // a double eigenvalue needs two distinct partners
        let g = [c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)];
        let r = symmetry_pairing(&g, 1e-8);
        assert!(r.passes());
        let neg: Vec<_> = r.partners.iter().map(|p| p[0].unwrap()).collect();
        let mut seen = neg.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn clusters_group_near_duplicates() {
        let g = [c(1.0, 0.0), c(1.0 + 1e-9, 0.0), c(2.0, 0.0)];
        let cl = clusters(&g, 1e-6);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].members, vec![0, 1]);
        assert!(cl[0].diameter < 2e-9);
    }

    #[test]
    fn spectrum_counts_and_disk() {
        let ex = exclusion_interval(1.0, 4.0);
        let g = [
            c(3.5, 0.0),
            c(-3.5, 0.0),
            c(0.0, 1.0),
            c(0.0, -1.0),
            c(1.5, 0.0),
            c(-1.5, 0.0),
        ];
        let s = Spectrum::new(&g, None, ex, 1e-6, 1e-8);
        assert_eq!(s.counts.propagating, 2);
        assert_eq!(s.counts.evanescent, 2);
        assert_eq!(s.counts.in_exclusion, 2);
        assert_eq!(s.count_in_disk(3.0, 0.1), 2);
        assert_eq!(s.max_abs_re, 3.5);
        assert!(s.entries.windows(2).all(|w| w[0].gamma.re <= w[1].gamma.re));
    }

    #[test]
    fn decay_slope_of_power_law() {
        let v: Vec<f64> = (1..=300).map(|n| 3.0 / n as f64).collect();
        assert!((decay_slope(&v, 1.0 / 3.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn generalized_eigenvalues_of_scaled_identity() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]));
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 8.0]));
        let ev = generalized_eigenvalues(&m, &g).unwrap();
        assert!((ev[0] - 0.5).abs() < 1e-15 && (ev[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_fields_stay_zero() {
        let m = generate_rect_slab(PI, PI, PI / 2.0, 2, 2).unwrap();
        let z = vec![c(0.0, 0.0); m.num_nodes()];
        let f = transverse_fields(&m, &z, &z, c(0.5, 0.0), 1.0, 4.0, 1e-10).unwrap();
        assert!(f.iter().all(|t| t.e1 == c(0.0, 0.0) && t.h2 == c(0.0, 0.0)));
    }

    #[test]
    fn static_fields_split_by_component() {
        // γ = 0: E comes from Ψ only, H from Π only
        let m = generate_rect_slab(PI, PI, PI / 2.0, 2, 2).unwrap();
        let pi: Vec<_> = m.nodes.iter().map(|p| c(p[0], 0.0)).collect();
        let psi: Vec<_> = m.nodes.iter().map(|p| c(p[1], 0.0)).collect();
        let f = transverse_fields(&m, &pi, &psi, c(0.0, 0.0), 1.0, 4.0, 1e-10).unwrap();
        for (t, tri) in f.iter().zip(&m.triangles) {
            let eps = if tri.region == Region::One { 1.0 } else { 4.0 };
            let i = c(0.0, 1.0);
            assert!((t.e1 - (-i / eps)).norm() < 1e-12);
            assert!(t.e2.norm() < 1e-12);
            assert!(t.h1.norm() < 1e-12);
            assert!((t.h2 - (-i)).norm() < 1e-12);
        }
    }

    #[test]
    fn fields_refuse_degeneration() {
        let m = generate_rect_slab(PI, PI, PI / 2.0, 2, 2).unwrap();
        let z = vec![c(1.0, 0.0); m.num_nodes()];
        assert!(matches!(
            transverse_fields(&m, &z, &z, c(2.0, 0.0), 1.0, 4.0, 1e-10),
            Err(Error::Degeneration { .. })
        ));
    }

    fn slab(n: usize) -> (PencilMatrices, Pencil) {
        let m = generate_rect_slab(PI, PI, PI / 2.0, n, n).unwrap();
        let s = build_spaces(&m).unwrap();
        let mats = PencilMatrices::assemble(&m, &s, 1.0, 4.0).unwrap();
        let p = Pencil::new(&mats).unwrap();
        (mats, p)
    }

    #[test]
    fn verify_all_passes_on_fresh_assembly() {
        let (mats, p) = slab(4);
        let r = verify_all(&mats, &p, None, &VerifyOptions::default());
        let bad: Vec<_> = r.failures().map(|c| c.name.clone()).collect();
        assert!(r.pass, "{bad:?}");
    }

    #[test]
    fn negated_k_entry_fails_positivity() {
        let (mut mats, p) = slab(4);
        mats.k[(3, 3)] = -mats.k[(3, 3)];
        let r = verify_all(&mats, &p, None, &VerifyOptions::default());
        assert!(!r.pass);
        assert!(!r.get("k_positive_definite").unwrap().pass);
    }

    #[test]
    fn degeneration_scan_homogeneous_is_full() {
        let m = generate_rect_slab(PI, PI, PI / 2.0, 3, 3).unwrap();
        let s = build_spaces(&m).unwrap();
        let p = Pencil::new(&PencilMatrices::assemble(&m, &s, 2.0, 2.0).unwrap()).unwrap();
        let scan = degeneration_scan(&[&p], 1e-8);
        assert_eq!(scan.rows.len(), 2);
        assert!(scan.rows.iter().all(|r| r.nullity == p.dim()));
    }
}

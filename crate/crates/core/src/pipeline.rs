//! Mesh → assemble → solve → analyze → compare-to-oracle, plus the file
//! artifacts of a run and parameter sweeps over `ε₂`.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{verify_all, Check, PropertyReport, Spectrum, VerifyOptions, WaveClass};
use crate::assembly::PencilMatrices;
use crate::config::{GeometryKind, OracleSettings, SolverConfig};
use crate::eigensolver::{solve_pencil, EigenReport, Route};
use crate::error::Result;
use crate::mesh::{generate_homogeneous_rect, generate_rect_slab, load_mesh, Mesh};
use crate::oracle::{homogeneous_rect_spectrum, OracleRoot, SlabFamily, SlabGuide, DEFAULT_SAMPLES};
use crate::output::{fmt17, opt_f64_17, to_json};
use crate::pencil::{ExclusionInterval, Pencil};
use crate::spaces::{build_spaces, FieldSpaces};

/// Everything assembled for one configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub spaces: FieldSpaces,
    pub matrices: PencilMatrices,
    pub pencil: Pencil,
}

/// The mesh described by the geometry section.
pub fn build_mesh(cfg: &SolverConfig) -> Result<Mesh> {
    let g = &cfg.geometry;
    let (nx, ny) = cfg.cells();
    match g.kind {
        GeometryKind::Slab => generate_rect_slab(g.width, g.height, g.interface_x, nx, ny),
        GeometryKind::Homogeneous => generate_homogeneous_rect(g.width, g.height, nx, ny, g.interface_x),
        GeometryKind::File => {
            let path = g.path.as_deref().unwrap_or(Path::new("mesh.txt"));
            load_mesh(&std::fs::read_to_string(path)?)
        }
    }
}

/// Assemble the problem, applying any configured faults.
pub fn build_problem(cfg: &SolverConfig) -> Result<Problem> {
    let mut mesh = build_mesh(cfg)?;
    let spaces = build_spaces(&mesh)?;
    let mut matrices = if let Some(k) = cfg.faults.flip_interface_edge {
        let gam = mesh.interface_edges();
        let e = gam[k.min(gam.len().saturating_sub(1))];
        mesh.edges[e].nodes.swap(0, 1);
        PencilMatrices::assemble_unchecked(&mesh, &spaces, cfg.eps1, cfg.eps2)?
    } else {
        PencilMatrices::assemble(&mesh, &spaces, cfg.eps1, cfg.eps2)?
    };
    if let Some(i) = cfg.faults.negate_k_diagonal {
        let i = i.min(matrices.dim().saturating_sub(1));
        matrices.k[(i, i)] = -matrices.k[(i, i)];
    }
    let pencil = Pencil::new(&matrices)?;
    Ok(Problem {
        mesh,
        spaces,
        matrices,
        pencil,
    })
}

/// The oracle roots that apply to this configuration: the separated
/// spectrum for equal permittivities, the slab roots otherwise. File
/// meshes have no oracle.
pub fn oracle_roots(cfg: &SolverConfig) -> Vec<OracleRoot> {
    let g = &cfg.geometry;
    if g.kind == GeometryKind::File {
        return Vec::new();
    }
    let ex = ExclusionInterval::new(cfg.eps1, cfg.eps2);
    let mut roots = if cfg.eps1 == cfg.eps2 {
        homogeneous_rect_spectrum(g.width, g.height, cfg.eps1, cfg.oracle.max_lambda)
    } else {
        let guide = SlabGuide {
            a: g.width,
            b: g.height,
            d: g.interface_x,
            eps1: cfg.eps1,
            eps2: cfg.eps2,
        };
        let jobs: Vec<(SlabFamily, usize)> = [SlabFamily::Lse, SlabFamily::Lsm]
            .into_iter()
            .flat_map(|f| cfg.oracle.transverse.iter().map(move |&n| (f, n)))
            .collect();
        jobs.into_par_iter()
            .map(|(f, n)| guide.roots(f, n, cfg.oracle.radius, DEFAULT_SAMPLES))
            .collect::<Vec<_>>()
            .concat()
    };
    for r in &mut roots {
        r.in_exclusion = r.gamma.im == 0.0 && ex.contains_abs(r.gamma.re);
    }
    roots.retain(|r| r.gamma.norm() <= cfg.oracle.radius);
    roots
}

/// One oracle root against its assigned FEM eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct OracleMatch {
    pub root: OracleRoot,
    #[serde(skip)]
    pub fem: Option<Complex64>,
    /// Relative gap, or absolute for a root at zero.
    #[serde(serialize_with = "opt_f64_17")]
    pub gap: Option<f64>,
    pub absolute: bool,
    /// False for roots near the exclusion interval, which are reported
    /// only.
    pub compared: bool,
    pub pass: bool,
}

/// Whether `|γ|` of a real root lies within `margin` of `I₀`.
pub fn near_exclusion(gamma: Complex64, ex: &ExclusionInterval, margin: f64) -> bool {
    let a = gamma.re.abs();
    gamma.im == 0.0 && a >= ex.lower - margin && a <= ex.upper + margin
}

/// Assign each compared root a distinct FEM eigenvalue, closest pairs
/// first, and measure the gaps.
pub fn compare_to_oracle(
    roots: &[OracleRoot],
    fem: &[Complex64],
    exclusion: &ExclusionInterval,
    settings: &OracleSettings,
) -> Vec<OracleMatch> {
    let compared: Vec<bool> = roots
        .iter()
        .map(|r| !near_exclusion(r.gamma, exclusion, settings.exclusion_margin))
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in roots.iter().enumerate() {
        if compared[i] {
            pairs.extend(fem.iter().enumerate().map(|(j, z)| ((z - r.gamma).norm(), i, j)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut root_to = vec![None; roots.len()];
    let mut used = vec![false; fem.len()];
    for (_, i, j) in pairs {
        if root_to[i].is_none() && !used[j] {
            root_to[i] = Some(j);
            used[j] = true;
        }
    }
    roots
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let z = root_to[i].map(|j| fem[j]);
            let absolute = r.gamma.norm() == 0.0;
            let gap = z.map(|z| {
                let d = (z - r.gamma).norm();
                if absolute {
                    d
                } else {
                    d / r.gamma.norm()
                }
            });
            let tol = if absolute {
                settings.zero_tol
            } else {
                settings.relative_tol
            };
            let pass = !compared[i] || gap.is_some_and(|g| g <= tol);
            OracleMatch {
                root: r.clone(),
                fem: z,
                gap,
                absolute,
                compared: compared[i],
                pass,
            }
        })
        .collect()
}

/// Results of one configured run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SolverConfig,
    pub problem: Problem,
    pub eigen: Option<EigenReport>,
    pub spectrum: Option<Spectrum>,
    pub report: PropertyReport,
    pub oracle: Vec<OracleMatch>,
}

impl RunResult {
    pub fn oracle_mismatches(&self) -> usize {
        self.oracle.iter().filter(|m| !m.pass).count()
    }

    /// True when every property check passes and every compared oracle
    /// root is matched.
    pub fn success(&self) -> bool {
        self.report.pass && self.oracle_mismatches() == 0
    }
}

/// Assemble, solve, classify and verify. A failed eigensolve is recorded
/// as a failed check rather than returned as an error, so corrupted
/// problems still produce a report.
pub fn run(cfg: &SolverConfig) -> Result<RunResult> {
    let problem = build_problem(cfg)?;
    let ex = problem.pencil.exclusion();
    let (eigen, solve_error) = match solve_pencil(&problem.pencil, &cfg.eigen_options()) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e)),
    };
    let spectrum = eigen.as_ref().map(|r| {
        Spectrum::new(
            &r.eigenvalues,
            Some(&r.residuals),
            ex,
            cfg.solver.classification_tol,
            cfg.solver.symmetry_tol,
        )
    });
    let opts = VerifyOptions {
        residual_tol: cfg.solver.residual_tol,
        spectral_symmetry: cfg.solver.symmetry_tol,
        ..VerifyOptions::default()
    };
    let mut report = verify_all(&problem.matrices, &problem.pencil, spectrum.as_ref(), &opts);
    match (&eigen, solve_error) {
        (Some(r), _) => report.push(Check::at_most("qr_unconverged", r.unconverged() as f64, 0.0)),
        (None, Some(e)) => {
            let mut c = Check::failed("eigensolve");
            c.name = format!("eigensolve: {e}");
            report.push(c);
        }
        (None, None) => {}
    }
    let oracle = match (&spectrum, cfg.oracle.enabled) {
        (Some(s), true) => compare_to_oracle(&oracle_roots(cfg), &s.gammas(), &ex, &cfg.oracle),
        _ => Vec::new(),
    };
    Ok(RunResult {
        config: cfg.clone(),
        problem,
        eigen,
        spectrum,
        report,
        oracle,
    })
}

#[derive(Serialize)]
struct SpectrumFile<'a> {
    eps1: Num,
    eps2: Num,
    cells: [usize; 2],
    dim_pi: usize,
    dim_psi: usize,
    companion_dim: usize,
    route: Route,
    qr_sweeps: usize,
    unconverged: usize,
    spectrum: &'a Spectrum,
}

struct Num(f64);

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::output::f64_17(&self.0, s)
    }
}

/// Spectrum JSON: problem header and the classified entries.
pub fn spectrum_json(result: &RunResult) -> Result<Option<String>> {
    let (Some(sp), Some(eig)) = (&result.spectrum, &result.eigen) else {
        return Ok(None);
    };
    let m = &result.problem.matrices;
    let cells = match result.config.geometry.kind {
        GeometryKind::File => [0, 0],
        _ => {
            let (nx, ny) = result.config.cells();
            [nx, ny]
        }
    };
    let file = SpectrumFile {
        eps1: Num(m.eps1),
        eps2: Num(m.eps2),
        cells,
        dim_pi: m.dim_pi,
        dim_psi: m.dim_psi,
        companion_dim: eig.companion_dim,
        route: eig.route,
        qr_sweeps: eig.iterations,
        unconverged: eig.unconverged(),
        spectrum: sp,
    };
    to_json(&file).map(Some)
}

/// Oracle comparison CSV.
pub fn oracle_csv(matches: &[OracleMatch]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "family",
        "m",
        "n",
        "oracle_re",
        "oracle_im",
        "fem_re",
        "fem_im",
        "gap",
        "gap_kind",
        "compared",
        "pass",
    ])
    .map_err(csv_err)?;
    for m in matches {
        let (fr, fi) = m.fem.map(|z| (fmt17(z.re), fmt17(z.im))).unwrap_or_default();
        w.write_record([
            m.root.family.as_str().to_string(),
            m.root.m.to_string(),
            m.root.n.to_string(),
            fmt17(m.root.gamma.re),
            fmt17(m.root.gamma.im),
            fr,
            fi,
            m.gap.map(fmt17).unwrap_or_default(),
            if m.absolute { "absolute" } else { "relative" }.to_string(),
            m.compared.to_string(),
            m.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Plot data: `re,im,class` per eigenvalue.
pub fn plot_csv(spectrum: &Spectrum) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["re", "im", "class"]).map_err(csv_err)?;
    for e in &spectrum.entries {
        w.write_record([fmt17(e.gamma.re), fmt17(e.gamma.im), e.class.as_str().to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write `spectrum.json`, `report.json`, `oracle.csv` and `plot.csv` into
/// `dir`, creating it if needed.
pub fn write_run(result: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(s) = spectrum_json(result)? {
        std::fs::write(dir.join("spectrum.json"), s)?;
    }
    std::fs::write(dir.join("report.json"), to_json(&result.report)?)?;
    if result.config.oracle.enabled {
        std::fs::write(dir.join("oracle.csv"), oracle_csv(&result.oracle)?)?;
    }
    if let Some(sp) = &result.spectrum {
        std::fs::write(dir.join("plot.csv"), plot_csv(sp)?)?;
    }
    Ok(())
}

/// One eigenvalue branch followed across sweep steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// `(step, γ, class)` in step order.
    pub points: Vec<(usize, Complex64, WaveClass)>,
}

fn first_quadrant(sp: &Spectrum, radius: f64) -> Vec<(Complex64, WaveClass)> {
    sp.entries
        .iter()
        .filter(|e| e.gamma.re >= 0.0 && e.gamma.im >= 0.0 && e.gamma.norm() <= radius)
        .map(|e| (e.gamma, e.class))
        .collect()
}

/// Nearest-neighbour continuation of the first-quadrant eigenvalues with
/// `|γ| ≤ radius`. Between consecutive steps the closest pairs are joined
/// first; eigenvalues left over start new branches.
pub fn track_branches(steps: &[&Spectrum], radius: f64) -> Vec<Branch> {
    let mut branches: Vec<Branch> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for (k, sp) in steps.iter().enumerate() {
        let pts = first_quadrant(sp, radius);
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, &b) in open.iter().enumerate() {
            let last = branches[b].points.last().expect("branches are never empty").1;
            pairs.extend(pts.iter().enumerate().map(|(j, p)| ((p.0 - last).norm(), bi, j)));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut taken_b = vec![false; open.len()];
        let mut taken_p = vec![false; pts.len()];
        let mut next_open = Vec::new();
        for (_, bi, j) in pairs {
            if !taken_b[bi] && !taken_p[j] {
                taken_b[bi] = true;
                taken_p[j] = true;
                branches[open[bi]].points.push((k, pts[j].0, pts[j].1));
                next_open.push(open[bi]);
            }
        }
        for (j, p) in pts.iter().enumerate() {
            if !taken_p[j] {
                next_open.push(branches.len());
                branches.push(Branch {
                    points: vec![(k, p.0, p.1)],
                });
            }
        }
        next_open.sort_unstable();
        open = next_open;
    }
    branches
}

/// A branch keeps the sign of `Re γ` along its whole length.
pub fn branch_preserves_sign(b: &Branch) -> bool {
    let pos = b.points.iter().all(|p| p.1.re >= 0.0);
    let neg = b.points.iter().all(|p| p.1.re <= 0.0);
    pos || neg
}

/// Results of a sweep over `ε₂`.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub eps2: Vec<f64>,
    pub runs: Vec<RunResult>,
    pub branches: Vec<Branch>,
}

impl SweepResult {
    pub fn success(&self) -> bool {
        self.runs.iter().all(RunResult::success)
    }
}

/// Equally spaced values from `from` to `to`, both included.
pub fn sweep_values(from: f64, to: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Solve every step of the configured sweep in parallel and track
/// branches.
pub fn sweep(cfg: &SolverConfig) -> Result<SweepResult> {
    let s = cfg.sweep.clone().ok_or_else(|| crate::error::Error::Config {
        line: None,
        msg: "the configuration has no [sweep] section".into(),
    })?;
    let eps2 = sweep_values(s.eps2_from, s.eps2_to, s.steps);
    let runs = eps2
        .par_iter()
        .map(|&e| {
            let mut c = cfg.clone();
            c.eps2 = e;
            if c.geometry.kind == GeometryKind::Homogeneous {
                c.geometry.kind = GeometryKind::Slab;
            }
            run(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    let specs: Vec<&Spectrum> = runs.iter().filter_map(|r| r.spectrum.as_ref()).collect();
    let branches = if specs.len() == runs.len() {
        track_branches(&specs, s.radius)
    } else {
        Vec::new()
    };
    Ok(SweepResult { eps2, runs, branches })
}

/// Combined dispersion CSV: `branch,step,eps2,re,im,class`.
pub fn branches_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["branch", "step", "eps2", "re", "im", "class"])
        .map_err(csv_err)?;
    for (b, br) in result.branches.iter().enumerate() {
        for (k, g, c) in &br.points {
            w.write_record([
                b.to_string(),
                k.to_string(),
                fmt17(result.eps2[*k]),
                fmt17(g.re),
                fmt17(g.im),
                c.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Write each step into `dir/step_<k>/` and the combined `dispersion.csv`.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, r) in result.runs.iter().enumerate() {
        write_run(r, &dir.join(format!("step_{k:03}")))?;
    }
    std::fs::write(dir.join("dispersion.csv"), branches_csv(result)?)?;
    Ok(())
}

//! Run configuration, read from a TOML file with the sections
//! `[geometry]`, `[material]`, `[solver]`, `[oracle]`, `[output]`,
//! `[sweep]` and `[faults]`. Every section except `[material]` is optional.
//!
//! ```toml
//! [geometry]
//! kind = "slab"          # slab | homogeneous | file
//! width = "pi"
//! height = "pi"
//! interface_x = "pi/2"
//! nx = 24
//! ny = 24
//!
//! [material]
//! eps1 = 1.0
//! eps2 = 4.0
//! ```
//!
//! Lengths may be numbers or short expressions in `pi` such as `"3*pi/4"`.
//! Errors carry the line of the offending key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::eigensolver::{EigenOptions, Route, DIMENSION_CAP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Length {
    Int(i64),
    Float(f64),
    Expr(String),
}

/// Evaluate a product/quotient of numbers and `pi`, e.g. `2*pi/3`.
pub fn parse_length(expr: &str) -> Option<f64> {
    let mut value = 1.0;
    let mut op = '*';
    let mut token = String::new();
    let apply = |value: &mut f64, op: char, token: &str| -> Option<()> {
        let t = token.trim();
        let x = if t.eq_ignore_ascii_case("pi") {
            std::f64::consts::PI
        } else {
            t.parse::<f64>().ok()?
        };
        match op {
            '*' => *value *= x,
            _ => *value /= x,
        }
        Some(())
    };
    for ch in expr.chars() {
        if ch == '*' || ch == '/' {
            apply(&mut value, op, &token)?;
            token.clear();
            op = ch;
        } else {
            token.push(ch);
        }
    }
    apply(&mut value, op, &token)?;
    value.is_finite().then_some(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Slab,
    Homogeneous,
    File,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    kind: Option<GeometryKind>,
    width: Option<Length>,
    height: Option<Length>,
    interface_x: Option<Length>,
    nx: Option<i64>,
    ny: Option<i64>,
    path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    eps1: f64,
    eps2: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    refinement: Option<i64>,
    classification_tol: Option<f64>,
    residual_tol: Option<f64>,
    symmetry_tol: Option<f64>,
    max_sweeps: Option<i64>,
    vectors: Option<bool>,
    vector_radius: Option<f64>,
    route: Option<Route>,
    balance: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    enabled: Option<bool>,
    radius: Option<f64>,
    max_lambda: Option<f64>,
    transverse: Option<Vec<i64>>,
    relative_tol: Option<f64>,
    zero_tol: Option<f64>,
    exclusion_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    eps2_from: Option<f64>,
    eps2_to: Option<f64>,
    steps: Option<i64>,
    radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFaults {
    flip_interface_edge: Option<i64>,
    negate_k_diagonal: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: Option<RawGeometry>,
    material: RawMaterial,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    faults: RawFaults,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub width: f64,
    pub height: f64,
    pub interface_x: f64,
    pub nx: usize,
    pub ny: usize,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub refinement: usize,
    pub classification_tol: f64,
    pub residual_tol: f64,
    pub symmetry_tol: f64,
    pub max_sweeps: usize,
    pub vectors: bool,
    pub vector_radius: Option<f64>,
    pub route: Route,
    pub balance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub enabled: bool,
    /// Compare roots with `|γ|` up to this radius.
    pub radius: f64,
    /// Largest separated eigenvalue for homogeneous rectangles.
    pub max_lambda: f64,
    /// Transverse indices for the slab oracle.
    pub transverse: Vec<usize>,
    pub relative_tol: f64,
    /// Absolute tolerance for an oracle root at `γ = 0`.
    pub zero_tol: f64,
    /// Roots whose `|γ|` is within this distance of `I₀` are not compared.
    pub exclusion_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub eps2_from: f64,
    pub eps2_to: f64,
    pub steps: usize,
    /// Branches are tracked for `|γ|` up to this radius.
    pub radius: f64,
}

/// Deliberate corruption of the assembled problem, for exercising the
/// property checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Faults {
    /// Reverse this interface edge (index among interface edges).
    pub flip_interface_edge: Option<usize>,
    /// Negate this diagonal entry of `K`.
    pub negate_k_diagonal: Option<usize>,
}

impl Faults {
    pub fn any(&self) -> bool {
        self.flip_interface_edge.is_some() || self.negate_k_diagonal.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub geometry: GeometryConfig,
    pub eps1: f64,
    pub eps2: f64,
    pub solver: SolverSettings,
    pub oracle: OracleSettings,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSettings>,
    pub faults: Faults,
}

impl SolverConfig {
    /// The default slab problem: `π × π`, slab at `π/2`, `ε₁ = 1`, `ε₂ = 4`.
    pub fn slab(n: usize) -> Self {
        let pi = std::f64::consts::PI;
        Self {
            geometry: GeometryConfig {
                kind: GeometryKind::Slab,
                width: pi,
                height: pi,
                interface_x: pi / 2.0,
                nx: n,
                ny: n,
                path: None,
            },
            eps1: 1.0,
            eps2: 4.0,
            solver: SolverSettings {
                refinement: 1,
                classification_tol: crate::analysis::CLASSIFICATION_TOL,
                residual_tol: 1e-8,
                symmetry_tol: crate::analysis::SYMMETRY_TOL,
                max_sweeps: crate::eigensolver::qr::DEFAULT_MAX_SWEEPS,
                vectors: false,
                vector_radius: None,
                route: Route::Squared,
                balance: true,
            },
            oracle: OracleSettings {
                enabled: true,
                radius: 4.0,
                max_lambda: 20.0,
                transverse: vec![0],
                relative_tol: 0.02,
                zero_tol: 0.05,
                exclusion_margin: 0.1,
            },
            output_dir: PathBuf::from("out"),
            sweep: None,
            faults: Faults::default(),
        }
    }

    /// Mesh cells along each axis after refinement.
    pub fn cells(&self) -> (usize, usize) {
        (
            self.geometry.nx * self.solver.refinement,
            self.geometry.ny * self.solver.refinement,
        )
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            route: self.solver.route,
            balance: self.solver.balance,
            max_sweeps: self.solver.max_sweeps,
            vectors: self.solver.vectors,
            vector_radius: self.solver.vector_radius,
            residual_tol: self.solver.residual_tol,
            dimension_cap: DIMENSION_CAP,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let Some(p) = &cfg.geometry.path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.geometry.path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_at(text, s.start)),
            msg: e.message().to_string(),
        })?;
        Self::from_raw(raw, text)
    }

    fn from_raw(raw: RawConfig, text: &str) -> Result<Self> {
        let err = |section: &str, key: &str, msg: String| Error::Config {
            line: key_line(text, section, key),
            msg,
        };
        let mut cfg = Self::slab(24);

        let g = raw.geometry;
        if let Some(g) = g {
            if let Some(k) = g.kind {
                cfg.geometry.kind = k;
            }
            for (key, val, slot) in [
                ("width", &g.width, &mut cfg.geometry.width),
                ("height", &g.height, &mut cfg.geometry.height),
                ("interface_x", &g.interface_x, &mut cfg.geometry.interface_x),
            ] {
                if let Some(v) = val {
                    let x = match v {
                        Length::Int(i) => *i as f64,
                        Length::Float(f) => *f,
                        Length::Expr(s) => parse_length(s)
                            .ok_or_else(|| err("geometry", key, format!("cannot evaluate length '{s}'")))?,
                    };
                    if !(x.is_finite() && x > 0.0) {
                        return Err(err("geometry", key, format!("{key} must be positive, found {x}")));
                    }
                    *slot = x;
                }
            }
            for (key, val, slot) in [("nx", g.nx, &mut cfg.geometry.nx), ("ny", g.ny, &mut cfg.geometry.ny)] {
                if let Some(v) = val {
                    if v < 2 {
                        return Err(err("geometry", key, format!("{key} must be at least 2, found {v}")));
                    }
                    *slot = v as usize;
                }
            }
            cfg.geometry.path = g.path;
            if cfg.geometry.kind == GeometryKind::File && cfg.geometry.path.is_none() {
                return Err(err("geometry", "kind", "kind = \"file\" needs a path".into()));
            }
        }

        let m = raw.material;
        for (key, v) in [("eps1", m.eps1), ("eps2", m.eps2)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(err(
                    "material",
                    key,
                    format!("{key} must be finite and >= 1, found {v}"),
                ));
            }
        }
        cfg.eps1 = m.eps1;
        cfg.eps2 = m.eps2;
        if cfg.geometry.kind == GeometryKind::Homogeneous && m.eps1 != m.eps2 {
            return Err(err(
                "material",
                "eps2",
                format!(
                    "homogeneous geometry needs eps1 = eps2, found {} and {}",
                    m.eps1, m.eps2
                ),
            ));
        }

        let s = raw.solver;
        if let Some(r) = s.refinement {
            if r < 1 {
                return Err(err(
                    "solver",
                    "refinement",
                    format!("refinement must be >= 1, found {r}"),
                ));
            }
            cfg.solver.refinement = r as usize;
        }
        for (key, val, slot) in [
            (
                "classification_tol",
                s.classification_tol,
                &mut cfg.solver.classification_tol,
            ),
            ("residual_tol", s.residual_tol, &mut cfg.solver.residual_tol),
            ("symmetry_tol", s.symmetry_tol, &mut cfg.solver.symmetry_tol),
        ] {
            if let Some(v) = val {
                if !(v.is_finite() && v > 0.0) {
                    return Err(err("solver", key, format!("{key} must be positive, found {v}")));
                }
                *slot = v;
            }
        }
        if let Some(v) = s.max_sweeps {
            if v < 1 {
                return Err(err(
                    "solver",
                    "max_sweeps",
                    format!("max_sweeps must be >= 1, found {v}"),
                ));
            }
            cfg.solver.max_sweeps = v as usize;
        }
        if let Some(v) = s.vector_radius {
            if v.is_nan() || v <= 0.0 {
                return Err(err(
                    "solver",
                    "vector_radius",
                    format!("vector_radius must be positive, found {v}"),
                ));
            }
            cfg.solver.vector_radius = Some(v);
        }
        if let Some(v) = s.vectors {
            cfg.solver.vectors = v;
        }
        if let Some(v) = s.route {
            cfg.solver.route = v;
        }
        if let Some(v) = s.balance {
            cfg.solver.balance = v;
        }

        let o = raw.oracle;
        if let Some(v) = o.enabled {
            cfg.oracle.enabled = v;
        }
        for (key, val, slot) in [
            ("radius", o.radius, &mut cfg.oracle.radius),
            ("max_lambda", o.max_lambda, &mut cfg.oracle.max_lambda),
            ("relative_tol", o.relative_tol, &mut cfg.oracle.relative_tol),
            ("zero_tol", o.zero_tol, &mut cfg.oracle.zero_tol),
        ] {
            if let Some(v) = val {
                if !(v.is_finite() && v > 0.0) {
                    return Err(err("oracle", key, format!("{key} must be positive, found {v}")));
                }
                *slot = v;
            }
        }
        if let Some(v) = o.exclusion_margin {
            if !(v.is_finite() && v >= 0.0) {
                return Err(err(
                    "oracle",
                    "exclusion_margin",
                    format!("exclusion_margin must be >= 0, found {v}"),
                ));
            }
            cfg.oracle.exclusion_margin = v;
        }
        if let Some(t) = o.transverse {
            if let Some(bad) = t.iter().find(|n| **n < 0) {
                return Err(err(
                    "oracle",
                    "transverse",
                    format!("transverse indices must be >= 0, found {bad}"),
                ));
            }
            cfg.oracle.transverse = t.into_iter().map(|n| n as usize).collect();
        }

        if let Some(d) = raw.output.dir {
            cfg.output_dir = d;
        }

        let w = raw.sweep;
        if w.eps2_from.is_some() || w.eps2_to.is_some() || w.steps.is_some() {
            let from = w.eps2_from.unwrap_or(cfg.eps2);
            let to = w.eps2_to.unwrap_or(cfg.eps2);
            for (key, v) in [("eps2_from", from), ("eps2_to", to)] {
                if !(v.is_finite() && v >= 1.0) {
                    return Err(err("sweep", key, format!("{key} must be finite and >= 1, found {v}")));
                }
            }
            let steps = w.steps.unwrap_or(2);
            if steps < 2 {
                return Err(err("sweep", "steps", format!("steps must be >= 2, found {steps}")));
            }
            let radius = w.radius.unwrap_or(cfg.oracle.radius);
            if radius.is_nan() || radius <= 0.0 {
                return Err(err(
                    "sweep",
                    "radius",
                    format!("radius must be positive, found {radius}"),
                ));
            }
            cfg.sweep = Some(SweepSettings {
                eps2_from: from,
                eps2_to: to,
                steps: steps as usize,
                radius,
            });
        }

        for (key, v, slot) in [
            (
                "flip_interface_edge",
                raw.faults.flip_interface_edge,
                &mut cfg.faults.flip_interface_edge,
            ),
            (
                "negate_k_diagonal",
                raw.faults.negate_k_diagonal,
                &mut cfg.faults.negate_k_diagonal,
            ),
        ] {
            if let Some(v) = v {
                if v < 0 {
                    return Err(err("faults", key, format!("{key} must be >= 0, found {v}")));
                }
                *slot = Some(v as usize);
            }
        }
        Ok(cfg)
    }
}

/// 1-based line containing byte offset `pos`.
fn line_at(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// 1-based line of `key = …` inside `[section]`.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const SLAB: &str = r#"
[geometry]
kind = "slab"
width = "pi"
height = 3.14159
interface_x = "pi/2"
nx = 8
ny = 6

[material]
eps1 = 1.0
eps2 = 4.0

[solver]
refinement = 2
route = "full"
"#;

    #[test]
    fn parses_full_example() {
        let c = SolverConfig::parse(SLAB).unwrap();
        assert_eq!(c.geometry.width, PI);
        assert_eq!(c.geometry.interface_x, PI / 2.0);
        assert_eq!(c.cells(), (16, 12));
        assert_eq!(c.solver.route, Route::Full);
        assert_eq!(c.eps2, 4.0);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn length_expressions() {
        assert_eq!(parse_length("pi"), Some(PI));
        assert_eq!(parse_length("3*pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_length(" 2.5 "), Some(2.5));
        assert_eq!(parse_length("pi+1"), None);
        assert_eq!(parse_length("1/0"), None);
    }

    #[test]
    fn low_permittivity_reports_its_line() {
        let text = SLAB.replace("eps2 = 4.0", "eps2 = 0.5");
        match SolverConfig::parse(&text) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, Some(12));
                assert!(msg.contains("eps2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = SLAB.replace("nx = 8", "nz = 8");
        match SolverConfig::parse(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, Some(7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let text = "[material]\neps1 = 1.0\neps2 = = 2\n";
        match SolverConfig::parse(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_material_is_rejected() {
        assert!(matches!(
            SolverConfig::parse("[geometry]\nnx = 4\n"),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn sweep_needs_two_steps() {
        let text = format!("{SLAB}\n[sweep]\neps2_from = 1.0\neps2_to = 4.0\nsteps = 1\n");
        assert!(matches!(SolverConfig::parse(&text), Err(Error::Config { .. })));
        let text = text.replace("steps = 1", "steps = 7");
        let s = SolverConfig::parse(&text).unwrap().sweep.unwrap();
        assert_eq!((s.eps2_from, s.eps2_to, s.steps), (1.0, 4.0, 7));
    }

    #[test]
    fn homogeneous_needs_equal_permittivities() {
        let text = SLAB.replace("kind = \"slab\"", "kind = \"homogeneous\"");
        assert!(matches!(
            SolverConfig::parse(&text),
            Err(Error::Config { line: Some(12), .. })
        ));
    }

    #[test]
    fn faults_section() {
        let text = format!("{SLAB}\n[faults]\nflip_interface_edge = 2\n");
        let c = SolverConfig::parse(&text).unwrap();
        assert_eq!(c.faults.flip_interface_edge, Some(2));
        assert!(c.faults.any());
    }
}

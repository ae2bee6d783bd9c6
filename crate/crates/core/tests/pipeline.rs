//! End-to-end runs on small meshes: outputs, determinism, decoupling and
//! sweeps.

use eigenwave::analysis::WaveClass;
use eigenwave::config::{GeometryKind, SolverConfig, SweepSettings};
use eigenwave::mesh::{generate_rect_slab, save_mesh};
use eigenwave::pipeline::{run, spectrum_json, sweep, write_run, write_sweep};

fn slab(n: usize) -> SolverConfig {
    SolverConfig::slab(n)
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&slab(6)).unwrap();
    write_run(&r, dir.path()).unwrap();
    for f in ["spectrum.json", "report.json", "oracle.csv", "plot.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let spectrum = r.spectrum.as_ref().unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(json["spectrum"]["entries"].as_array().unwrap().len(), spectrum.len());
    assert_eq!(json["cells"], serde_json::json!([6, 6]));
    let plot = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), spectrum.len() + 1);
    assert!(r.report.pass, "{:?}", r.report.failures().collect::<Vec<_>>());
}

#[test]
fn spectrum_count_matches_pencil_degree() {
    let r = run(&slab(5)).unwrap();
    let n = r.problem.pencil.dim();
    assert_eq!(r.spectrum.unwrap().len(), 4 * n);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = spectrum_json(&run(&slab(5)).unwrap()).unwrap().unwrap();
    let b = spectrum_json(&run(&slab(5)).unwrap()).unwrap().unwrap();
    assert_eq!(a, b);
}

#[test]
fn equal_permittivities_give_no_complex_waves() {
    let mut cfg = slab(6);
    cfg.geometry.kind = GeometryKind::Homogeneous;
    cfg.eps1 = 2.0;
    cfg.eps2 = 2.0;
    let r = run(&cfg).unwrap();
    let check = r.report.get("homogeneous_real_gamma_sq").expect("decoupling check");
    assert!(check.pass, "margin {:e}", check.margin);
    assert_eq!(r.spectrum.unwrap().counts.get(WaveClass::Complex), 0);
}

#[test]
fn mesh_file_geometry_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let pi = std::f64::consts::PI;
    let mesh = generate_rect_slab(pi, pi, pi / 2.0, 5, 5).unwrap();
    std::fs::write(dir.path().join("guide.mesh"), save_mesh(&mesh)).unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        "[geometry]\nkind = \"file\"\npath = \"guide.mesh\"\n\n[material]\neps1 = 1.0\neps2 = 4.0\n",
    )
    .unwrap();
    let from_file = run(&SolverConfig::from_file(&cfg_path).unwrap()).unwrap();
    let generated = run(&slab(5)).unwrap();
    assert_eq!(
        from_file.spectrum.unwrap().gammas(),
        generated.spectrum.unwrap().gammas()
    );
    assert!(from_file.oracle.is_empty());
}

#[test]
fn sweep_tracks_branches_across_steps() {
    let mut cfg = slab(4);
    cfg.oracle.enabled = false;
    cfg.sweep = Some(SweepSettings {
        eps2_from: 2.0,
        eps2_to: 3.0,
        steps: 3,
        radius: 2.0,
    });
    let s = sweep(&cfg).unwrap();
    assert_eq!(s.eps2, vec![2.0, 2.5, 3.0]);
    assert_eq!(s.runs.len(), 3);
    assert!(!s.branches.is_empty());
    assert!(s
        .branches
        .iter()
        .all(|b| b.points.windows(2).all(|w| w[0].0 + 1 == w[1].0)));
    let dir = tempfile::tempdir().unwrap();
    write_sweep(&s, dir.path()).unwrap();
    for k in 0..3 {
        assert!(dir.path().join(format!("step_{k:03}")).join("spectrum.json").is_file());
    }
    let csv = std::fs::read_to_string(dir.path().join("dispersion.csv")).unwrap();
    assert!(csv.starts_with("branch,step,eps2,re,im,class"));
}

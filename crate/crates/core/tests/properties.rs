//! Property tests over randomly drawn meshes, permittivities and spectral
//! parameters.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use eigenwave::analysis::{classify, generalized_eigenvalues, pencil_identities, symmetry_pairing, SymmetryMap};
use eigenwave::assembly::{assemble_s_volume, PencilMatrices};
use eigenwave::config::{parse_length, SolverConfig};
use eigenwave::eigensolver::DenseEigen;
use eigenwave::mesh::{generate_rect_slab, load_mesh, save_mesh};
use eigenwave::oracle::{SlabFamily, SlabGuide};
use eigenwave::output::fmt17;
use eigenwave::pencil::{exclusion_interval, Pencil};
use eigenwave::spaces::build_spaces;

fn slab_problem(nx: usize, ny: usize, eps1: f64, eps2: f64) -> (PencilMatrices, Pencil) {
    let pi = std::f64::consts::PI;
    let mesh = generate_rect_slab(pi, pi, pi / 2.0, nx, ny).unwrap();
    let spaces = build_spaces(&mesh).unwrap();
    let m = PencilMatrices::assemble(&mesh, &spaces, eps1, eps2).unwrap();
    let p = Pencil::new(&m).unwrap();
    (m, p)
}

/// Largest distance from a point of `a` to its nearest point in `b`.
fn directed_hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn random_matrix(n: usize, values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        values[(i * n + j) % values.len()] + 0.1 * (i as f64 - j as f64)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_areas_and_refinement(
        w in 0.5f64..4.0,
        h in 0.5f64..4.0,
        frac in 0.2f64..0.8,
        nx in 2usize..8,
        ny in 2usize..8,
    ) {
        let m = generate_rect_slab(w, h, frac * w, nx, ny).unwrap();
        prop_assert!((m.total_area() - w * h).abs() <= 1e-12 * w * h);
        prop_assert!(m.check_orientation().is_ok());
        let fine = generate_rect_slab(w, h, frac * w, 2 * nx, 2 * ny).unwrap();
        prop_assert_eq!(fine.triangles.len(), 4 * m.triangles.len());
        prop_assert_eq!(load_mesh(&save_mesh(&m)).unwrap(), m);
    }

    #[test]
    fn gram_positive_and_zero_mean_basis(nx in 2usize..7, ny in 2usize..7, y in prop::collection::vec(-1.0f64..1.0, 64)) {
        let pi = std::f64::consts::PI;
        let mesh = generate_rect_slab(pi, pi, pi / 2.0, nx, ny).unwrap();
        let s = build_spaces(&mesh).unwrap();
        let g = &s.gram;
        prop_assert_eq!(g, &g.transpose());
        let min = g.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min > 0.0);
        let coords: Vec<f64> = (0..s.null_basis.dim()).map(|i| y[i % y.len()]).collect();
        let nodal = s.null_basis.apply(&coords);
        let mean: f64 = nodal.iter().zip(s.mean.iter()).map(|(a, b)| a * b).sum();
        let scale: f64 = nodal.iter().map(|v| v.abs()).sum::<f64>() * s.mean.amax();
        prop_assert!(mean.abs() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn operator_bounds_hold(eps1 in 1.0f64..8.0, eps2 in 1.0f64..8.0, n in 3usize..6) {
        let (m, _) = slab_problem(n, n, eps1, eps2);
        let eps_max = eps1.max(eps2);
        for a in [&m.k, &m.a1, &m.a2, &m.s] {
            prop_assert!((a - a.transpose()).amax() <= 1e-14);
        }
        let a1 = generalized_eigenvalues(&m.a1, &m.gram).unwrap();
        prop_assert!(a1[0] >= 1.0 - 1e-10 && *a1.last().unwrap() <= eps_max + 1e-10);
        let a2 = generalized_eigenvalues(&m.a2, &m.gram).unwrap();
        prop_assert!(a2[0] >= 1.0 / eps_max - 1e-10 && *a2.last().unwrap() <= 1.0 + 1e-10);
        let s = generalized_eigenvalues(&m.s, &m.gram).unwrap();
        prop_assert!(s[0] >= -0.5 - 1e-10 && *s.last().unwrap() <= 0.5 + 1e-10);
    }

    #[test]
    fn line_and_volume_coupling_agree(n in 2usize..7, frac in 0.25f64..0.75) {
        let pi = std::f64::consts::PI;
        let mesh = generate_rect_slab(pi, pi, frac * pi, n, n).unwrap();
        let spaces = build_spaces(&mesh).unwrap();
        let m = PencilMatrices::assemble(&mesh, &spaces, 1.0, 3.0).unwrap();
        let sv = assemble_s_volume(&spaces, &mesh).unwrap();
        prop_assert!((&m.s - sv).amax() <= 1e-12);
    }

    #[test]
    fn pencil_identities_hold(eps1 in 1.0f64..6.0, eps2 in 1.0f64..6.0, seed in any::<u64>()) {
        let (_, p) = slab_problem(3, 3, eps1, eps2);
        let (herm, flip) = pencil_identities(&p, 10, seed);
        prop_assert!(herm <= 1e-13);
        prop_assert!(flip <= 1e-13);
    }

    #[test]
    fn exclusion_interval_contains_degeneration_points(eps1 in 1.0f64..20.0, eps2 in 1.0f64..20.0) {
        let ex = exclusion_interval(eps1, eps2);
        let (lo, hi) = (eps1.min(eps2).sqrt(), eps1.max(eps2).sqrt());
        prop_assert!(ex.lower > 0.0);
        prop_assert!(ex.lower <= lo * (1.0 + 1e-15));
        prop_assert!(hi <= ex.upper * (1.0 + 1e-15));
    }

    #[test]
    fn classification_respects_symmetry(re in -5.0f64..5.0, im in -5.0f64..5.0, eps2 in 1.0f64..9.0) {
        let ex = exclusion_interval(1.0, eps2);
        let g = Complex64::new(re, im);
        let c = classify(g, &ex, 1e-6);
        for map in SymmetryMap::ALL {
            prop_assert_eq!(classify(map.apply(g), &ex, 1e-6), c);
        }
    }

    #[test]
    fn closed_sets_pair_exactly(points in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..12)) {
        let mut gammas = Vec::new();
        for (a, b) in points {
            let z = Complex64::new(a, b);
            gammas.extend([z, -z, z.conj(), -z.conj()]);
        }
        let report = symmetry_pairing(&gammas, 1e-8);
        prop_assert!(report.passes());
        prop_assert!(report.overall_max() <= 1e-12);
    }

    #[test]
    fn dense_spectrum_is_conjugate_closed_and_similarity_invariant(
        n in 3usize..12,
        values in prop::collection::vec(-1.0f64..1.0, 16..64),
    ) {
        let a = random_matrix(n, &values);
        let ev = DenseEigen::new(&a, true, 30).eigenvalues;
        prop_assert_eq!(ev.len(), n);
        let conj: Vec<Complex64> = ev.iter().map(|z| z.conj()).collect();
        let scale = 1.0 + a.norm();
        prop_assert!(directed_hausdorff(&ev, &conj) <= 1e-10 * scale);

        let q = random_matrix(n, &values.iter().rev().copied().collect::<Vec<_>>()).qr().q();
        let b = q.transpose() * &a * &q;
        let evb = DenseEigen::new(&b, true, 30).eigenvalues;
        let d = directed_hausdorff(&ev, &evb).max(directed_hausdorff(&evb, &ev));
        prop_assert!(d <= 1e-9 * scale, "similarity distance {d:e}");
    }

    #[test]
    fn oracle_roots_real_or_imaginary(d_frac in 0.2f64..0.8, eps2 in 1.5f64..6.0) {
        let pi = std::f64::consts::PI;
        let guide = SlabGuide { a: pi, b: pi, d: d_frac * pi, eps1: 1.0, eps2 };
        for family in [SlabFamily::Lse, SlabFamily::Lsm] {
            let mut previous = usize::MAX;
            for n in 0..3 {
                let roots = guide.roots(family, n, 3.0, 800);
                for r in &roots {
                    prop_assert!(r.gamma.re == 0.0 || r.gamma.im == 0.0);
                    prop_assert!(r.residual <= 1e-12);
                }
                prop_assert!(roots.len() <= previous);
                previous = roots.len();
            }
        }
    }

    #[test]
    fn seventeen_digits_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn plain_lengths_parse(x in 0.01f64..100.0) {
        prop_assert_eq!(parse_length(&fmt17(x)), Some(x));
        let expr = format!("{x}*pi/2");
        let expect = x * std::f64::consts::PI / 2.0;
        prop_assert!((parse_length(&expr).unwrap() - expect).abs() <= 1e-12 * x);
    }

    #[test]
    fn permittivity_below_one_is_rejected(eps in 0.0f64..0.999) {
        let text = format!(
            "[geometry]\nkind = \"slab\"\nwidth = 1.0\nheight = 1.0\ninterface_x = 0.5\nnx = 4\nny = 4\n\n[material]\neps1 = 1.0\neps2 = {eps}\n"
        );
        prop_assert!(SolverConfig::parse(&text).is_err());
    }
}

use resonance_core::linalg::eigenvalues;
use resonance_core::operator_matrix::heisenberg::Heisenberg;
use resonance_core::operator_matrix::*;
use resonance_core::spectral::{resonance_filter, DEFAULT_FILTER_TOL};
use resonance_core::{c64, CMat, Error, PotentialSpec, SymplecticTorusMap, C64};

fn lambda() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap().then(a.arg().partial_cmp(&b.arg()).unwrap()));
    v
}

/// Largest distance from each value in `a` to its nearest neighbour in `b`.
fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

#[test]
fn basis_weights() {
    let b = build_basis(&SymplecticTorusMap::cat(), 3, 8, 6.0).unwrap();
    assert_eq!(b.dim(), 24);
    assert_eq!(b.weights[0], 1.0);
    for k in 0..8 {
        assert!((b.weights[k] - (1.0 + (k * k) as f64).powf(3.0)).abs() < 1e-9 * b.weights[k]);
    }
    assert_eq!(b.kappa, [0.5, 0.5]);
    assert!(build_basis(&SymplecticTorusMap::cat(), 0, 4, 2.0).is_err());
}

#[test]
fn heisenberg_operators_are_a_projective_representation() {
    for n in [2usize, 3, 5, 7] {
        let h = Heisenberg::for_map(&SymplecticTorusMap::cat(), n).unwrap();
        let id = CMat::identity(n);
        let ks = [[1i64, 0], [0, 1], [1, 1], [2, -1], [-3, 2]];
        let mut sign = 0.0;
        for k in ks {
            let t = h.t_matrix(k);
            assert!(t.adjoint().matmul(&t).sub(&id).norm_max() < 1e-13);
            for l in ks {
                let tl = h.t_matrix(l);
                // T(k)T(l) = e^{±i2π ω(k,l)/N} T(l)T(k)
                let lhs = t.matmul(&tl);
                let rhs = tl.matmul(&t);
                let w = (k[0] * l[1] - k[1] * l[0]) as f64;
                if w == 0.0 {
                    assert!(lhs.sub(&rhs).norm_max() < 1e-13);
                    continue;
                }
                let ratio = lhs.matmul(&rhs.adjoint());
                let z = ratio[(0, 0)];
                assert!(ratio.sub(&id.scale(z)).norm_max() < 1e-12);
                let s = if (z - resonance_core::cis(2.0 * std::f64::consts::PI * w / n as f64)).norm() < 1e-12 { 1.0 } else { -1.0 };
                assert!((z - resonance_core::cis(s * 2.0 * std::f64::consts::PI * w / n as f64)).norm() < 1e-12);
                if sign == 0.0 {
                    sign = s;
                }
                assert_eq!(s, sign, "one orientation convention throughout");
            }
        }
    }
}

#[test]
fn linear_cat_matrix_is_metaplectic_times_band_multipliers() {
    let cat = SymplecticTorusMap::cat();
    let l = lambda();
    for n in [3usize, 5, 8] {
        let cfg = EngineConfig { bands: 5, ..Default::default() };
        let op = assemble(&cat, &PotentialSpec::Zero, n, &cfg).unwrap();
        let h = Heisenberg::for_map(&cat, n).unwrap();
        let u = h.metaplectic(&cat.linear_part).unwrap();
        let d = CMat::diag(&(0..5).map(|k| c64(l.powf(-0.5 - k as f64), 0.0)).collect::<Vec<_>>());
        assert!(op.matrix.sub(&u.kron(&d)).norm_max() < 1e-10, "N = {n}");
    }
}

#[test]
fn constant_potential_scales_the_matrix() {
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.01);
    let cfg = EngineConfig { bands: 4, ..Default::default() };
    let a = assemble(&map, &PotentialSpec::Zero, 5, &cfg).unwrap();
    let b = assemble(&map, &PotentialSpec::Constant(0.3), 5, &cfg).unwrap();
    assert!(b.matrix.sub(&a.matrix.scale(c64(0.3f64.exp(), 0.0))).norm_max() < 1e-12);
}

#[test]
fn zero_potential_spectra_stay_in_the_unit_disk() {
    for eps in [0.0, 0.02, 0.03] {
        let map = SymplecticTorusMap::perturbed_cat(eps, eps);
        let op = assemble(&map, &PotentialSpec::Zero, 7, &EngineConfig::default()).unwrap();
        assert!(op.eigenvalues().unwrap().iter().all(|z| z.norm() <= 1.0 + 1e-8));
    }
}

#[test]
fn weighting_is_a_similarity() {
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.02);
    let cfg = EngineConfig { bands: 5, r: 3.0, ..Default::default() };
    let op = assemble(&map, &PotentialSpec::Reference, 6, &cfg).unwrap();
    let a = sorted(op.eigenvalues().unwrap());
    let b = sorted(eigenvalues(&op.weighted()).unwrap());
    assert!(hausdorff(&a, &b).max(hausdorff(&b, &a)) < 1e-10);
}

#[test]
fn grid_doubling_leaves_stable_eigenvalues_fixed() {
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.02);
    let v = PotentialSpec::parse("field:0.2*cos[1,0]+0.1*sin[1,1]").unwrap();
    let eig = |grid_m: usize, bands: usize| assemble(&map, &v, 6, &EngineConfig { bands, grid_m, r: 2.0 }).unwrap().eigenvalues().unwrap();
    let stable = |m: usize| resonance_filter(&eig(m, 6), &eig(m, 12), DEFAULT_FILTER_TOL).into_iter().map(|r| r.z).collect::<Vec<_>>();
    let (a, b) = (stable(32), stable(64));
    assert!(!a.is_empty() && a.len() == b.len());
    assert!(hausdorff(&a, &b) < 1e-8, "{:e}", hausdorff(&a, &b));
}

#[test]
fn external_projector_of_the_linear_cat() {
    let cat = SymplecticTorusMap::cat();
    let op = assemble(&cat, &PotentialSpec::Zero, 5, &EngineConfig::default()).unwrap();
    let f = &op.matrix;
    let r0 = lambda().powf(-0.5);
    let pi = external_projector(f, 0.4, 0.8).unwrap();
    assert!((pi.trace() - c64(5.0, 0.0)).norm() < 1e-8);
    assert!(pi.matmul(&pi).sub(&pi).norm_max() < 1e-8);
    assert!(f.matmul(&pi).sub(&pi.matmul(f)).norm_max() < 1e-8);
    assert!(matches!(external_projector(f, r0, 0.8), Err(Error::NoGap(_))));
    // the outer projector through infinity gives the same band
    let pi_inf = external_projector(f, 0.4, f64::INFINITY).unwrap();
    assert!(pi_inf.sub(&pi).norm_max() < 1e-8);
}

#[test]
fn perturbed_external_band_is_truncation_stable() {
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.02);
    let band0 = |bands: usize| {
        let ev = assemble(&map, &PotentialSpec::Reference, 10, &EngineConfig { bands, ..Default::default() }).unwrap().eigenvalues().unwrap();
        sorted(ev.into_iter().filter(|z| z.norm() > 0.7).collect())
    };
    let (a, b) = (band0(6), band0(12));
    assert_eq!(a.len(), 10);
    assert_eq!(b.len(), 10);
    assert!(hausdorff(&a, &b) < 1e-5);
}

#[test]
fn snapshot_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.bin");
    let op = assemble(&SymplecticTorusMap::perturbed_cat(0.01, 0.0), &PotentialSpec::Constant(0.1), 4, &EngineConfig { bands: 3, ..Default::default() }).unwrap();
    write_snapshot(&path, &op).unwrap();
    let (h, m) = read_snapshot(&path).unwrap();
    assert_eq!((h.n, h.bands, h.grid_m, h.rows, h.cols), (4, 3, 32, 12, 12));
    assert_eq!(h.map_hash, op.map_hash);
    assert_eq!(h.potential_tag, op.potential_tag);
    assert_eq!(m, op.matrix);
    let sidecar: SnapshotHeader = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar, h);
    std::fs::write(&path, b"garbage!garbage!").unwrap();
    assert!(read_snapshot(&path).is_err());
}

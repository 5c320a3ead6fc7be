use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonance_core::dynamics::*;
use resonance_core::{SymplecticTorusMap, TorusPoint};

fn lambda() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

fn random_points(seed: u64, count: usize) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| TorusPoint::new(rng.gen(), rng.gen())).collect()
}

/// Brute-force count of `x ∈ (1/D)Z² mod 1` with `Mⁿx ≡ x`, `D = |det(Mⁿ − I)|`.
fn lattice_scan_count(m: &IMat2, n: u32) -> usize {
    let p = imat_pow(m, n);
    let d = ((p[0][0] - 1) * (p[1][1] - 1) - p[0][1] * p[1][0]).abs();
    let mut count = 0;
    for a in 0..d {
        for b in 0..d {
            let ya = (p[0][0] * a + p[0][1] * b - a).rem_euclid(d);
            let yb = (p[1][0] * a + p[1][1] * b - b).rem_euclid(d);
            if ya == 0 && yb == 0 {
                count += 1;
            }
        }
    }
    count
}

fn angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let c = (a[0] * b[1] - a[1] * b[0]).abs() / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
    c.asin()
}

#[test]
fn torus_point_reduction_is_idempotent() {
    for (q, p) in [(1.25, -0.5), (-3.0, 7.75), (0.999999, 2.0)] {
        let x = TorusPoint::new(q, p);
        assert!((0.0..1.0).contains(&x.q) && (0.0..1.0).contains(&x.p));
        assert_eq!(TorusPoint::new(x.q, x.p), x);
    }
}

#[test]
fn apply_examples() {
    let cat = SymplecticTorusMap::cat();
    assert_eq!(cat.apply(TorusPoint::new(0.0, 0.0)), TorusPoint::new(0.0, 0.0));
    let y = cat.apply(TorusPoint::new(0.5, 0.5));
    assert!(y.torus_dist(&TorusPoint::new(0.5, 0.0)) < 1e-15);
}

#[test]
fn unperturbed_map_is_the_linear_action() {
    let map = SymplecticTorusMap::perturbed_cat(0.0, 0.0);
    for x in random_points(1, 1000) {
        let y = map.apply(x);
        let z = TorusPoint::new(2.0 * x.q + x.p, x.q + x.p);
        assert_eq!(y.torus_dist(&z), 0.0);
    }
}

#[test]
fn inverse_is_exact() {
    let map = SymplecticTorusMap::perturbed_cat(0.05, 0.04);
    for x in random_points(2, 1000) {
        assert!(map.inverse_apply(map.apply(x)).torus_dist(&x) < 1e-12);
        assert!(map.apply(map.inverse_apply(x)).torus_dist(&x) < 1e-12);
    }
}

#[test]
fn differential_examples() {
    let cat = SymplecticTorusMap::cat();
    for x in random_points(3, 50) {
        assert_eq!(cat.differential(x), [[2.0, 1.0], [1.0, 1.0]]);
    }
    let map = SymplecticTorusMap::perturbed_cat(0.05, 0.03);
    let h = 1e-5;
    for x in random_points(4, 200) {
        let x = x.as_array();
        let jac = map.differential_at(x);
        assert!((det2(&jac) - 1.0).abs() < 1e-12);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (map.lift(xp), map.lift(xm));
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac[i][j]).abs() < 1e-6, "∂f{i}/∂x{j}: {fd} vs {}", jac[i][j]);
            }
        }
    }
}

#[test]
fn symplecticity_on_ten_thousand_points() {
    for eps in [0.0, 0.01, 0.03, 0.05] {
        let map = SymplecticTorusMap::perturbed_cat(eps, eps);
        for x in random_points(5, 10_000) {
            assert!((det2(&map.differential(x)) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn lift_commutes_with_translations() {
    let map = SymplecticTorusMap::perturbed_cat(0.05, 0.02);
    for x in random_points(6, 100) {
        let x = x.as_array();
        for n in [[1.0, 0.0], [0.0, 1.0], [-2.0, 3.0]] {
            let a = map.lift([x[0] + n[0], x[1] + n[1]]);
            let b = map.lift(x);
            for i in 0..2 {
                let d = a[i] - b[i];
                assert!((d - d.round()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn small_period_counts() {
    let cat = SymplecticTorusMap::cat();
    let fixed = enumerate_periodic_points(&cat, 1).unwrap();
    assert_eq!(fixed.len(), 1);
    assert!(fixed[0].representative.torus_dist(&TorusPoint::new(0.0, 0.0)) < 1e-15);
    assert_eq!(enumerate_periodic_points(&cat, 2).unwrap().len(), 5);
    assert_eq!(enumerate_periodic_points(&cat, 3).unwrap().len(), 16);
    // period-2 points lie on the 1/5 lattice
    for o in enumerate_periodic_points(&cat, 2).unwrap() {
        let x = o.representative;
        assert!((5.0 * x.q - (5.0 * x.q).round()).abs() < 1e-12);
        assert!((5.0 * x.p - (5.0 * x.p).round()).abs() < 1e-12);
    }
}

#[test]
fn orbit_counts_match_lattice_scan() {
    let cat = SymplecticTorusMap::cat();
    for n in 1..=8u32 {
        let p = imat_pow(&cat.linear_part, n);
        let trace_rule = (p[0][0] + p[1][1] - 2).unsigned_abs() as usize;
        let scanned = lattice_scan_count(&cat.linear_part, n);
        assert_eq!(scanned, trace_rule, "n = {n}");
        assert_eq!(enumerate_periodic_points(&cat, n as usize).unwrap().len(), scanned, "n = {n}");
    }
}

#[test]
fn periodic_orbit_invariants() {
    for map in [SymplecticTorusMap::cat(), SymplecticTorusMap::perturbed_cat(0.04, 0.03)] {
        for n in 1..=5 {
            let orbits = enumerate_periodic_points(&map, n).unwrap();
            let mut reps: Vec<_> = orbits.iter().map(|o| ((o.representative.q * 1e9).round() as i64, (o.representative.p * 1e9).round() as i64)).collect();
            for o in &orbits {
                assert_eq!(o.points.len(), n);
                assert!(o.closure_defect(&map) < 1e-10);
                for j in 0..n {
                    assert!(map.apply(o.points[j]).torus_dist(&o.points[(j + 1) % n]) < 1e-10);
                }
                assert!((det2(&o.monodromy) - 1.0).abs() < 1e-10);
                let m = o.monodromy;
                let direct = ((1.0 - m[0][0]) * (1.0 - m[1][1]) - m[0][1] * m[1][0]).abs();
                assert!(o.stability_det > 0.0 && (o.stability_det - direct).abs() < 1e-9 * direct);
            }
            // every point counted once; cycles share their orbit key
            reps.sort();
            reps.dedup();
            assert_eq!(reps.len(), orbits.len());
            for o in &orbits {
                let shifted = orbits.iter().find(|p| p.representative.torus_dist(&o.points[1 % n]) < 1e-10).expect("image listed");
                assert_eq!(shifted.orbit_key(), o.orbit_key());
            }
        }
    }
}

#[test]
fn structural_stability_of_counts() {
    let cat = SymplecticTorusMap::cat();
    let pert = SymplecticTorusMap::perturbed_cat(0.05, 0.05);
    for n in 1..=6 {
        assert_eq!(enumerate_periodic_points(&pert, n).unwrap().len(), enumerate_periodic_points(&cat, n).unwrap().len());
    }
}

#[test]
fn linear_unstable_direction() {
    let cat = SymplecticTorusMap::cat();
    let l = lambda();
    // eigenvector of [[2,1],[1,1]] for λ: (1, λ − 2)
    let v = [1.0, l - 2.0];
    for x in random_points(7, 20) {
        let s = unstable_direction(&cat, x, 200).unwrap();
        assert!(angle(s.e_u, v) < 1e-12);
        assert!((s.e_u[0].hypot(s.e_u[1]) - 1.0).abs() < 1e-14);
        assert!(s.e_u[0] > 0.0);
        assert!((s.expansion_rate - l).abs() < 1e-12);
        assert!(angle(s.e_u, s.e_s) > 1.0);
    }
}

#[test]
fn perturbed_splitting_is_invariant() {
    let eps = 0.05;
    let map = SymplecticTorusMap::perturbed_cat(eps, eps);
    let (_, eu0, _) = map.linear_eigen();
    for x in random_points(8, 100) {
        let s = unstable_direction(&map, x, 200).unwrap();
        assert!(angle(s.e_u, eu0) < 10.0 * eps);
        let fx = map.apply(x);
        let sf = unstable_direction(&map, fx, 200).unwrap();
        let img = matvec2(&map.differential(x), s.e_u);
        assert!(angle(img, sf.e_u) < 1e-8);
        // image is a positive multiple under the sign convention
        assert!(img[0] * sf.e_u[0] + img[1] * sf.e_u[1] > 0.0);
        // 200-step cocycle oracle along the backward orbit
        let mut back = vec![x];
        for _ in 0..200 {
            back.push(map.inverse_apply(*back.last().unwrap()));
        }
        let mut v = eu0;
        for k in (1..back.len()).rev() {
            v = matvec2(&map.differential(back[k]), v);
            let n = v[0].hypot(v[1]);
            v = [v[0] / n, v[1] / n];
        }
        assert!(angle(v, s.e_u) < 1e-8);
    }
}

#[test]
fn cone_reports() {
    let l = lambda();
    let lin = verify_anosov_cones(&SymplecticTorusMap::cat(), 16, 0.5);
    assert!(lin.pass);
    assert!((lin.min_expansion - l).abs() < 1e-10);
    let pert = verify_anosov_cones(&SymplecticTorusMap::perturbed_cat(0.05, 0.05), 32, 0.5);
    assert!(pert.pass && pert.min_expansion > 2.3);
    assert!(!verify_anosov_cones(&SymplecticTorusMap::perturbed_cat(10.0, 10.0), 32, 0.5).pass);
}

#[test]
fn birkhoff_sums() {
    let cat = SymplecticTorusMap::cat();
    let pert = SymplecticTorusMap::perturbed_cat(0.03, 0.02);
    let g = |x: TorusPoint| (2.0 * std::f64::consts::PI * x.q).cos() + x.p;
    for x in random_points(9, 20) {
        assert!((birkhoff_sum(&pert, |_| 0.7, x, 13) - 13.0 * 0.7).abs() < 1e-12);
        assert_eq!(birkhoff_sum(&pert, g, x, 1), g(pert.apply(x)));
        let v0 = |y: TorusPoint| 0.5 * unstable_direction(&cat, y, 200).unwrap().expansion_rate.ln();
        assert!((birkhoff_sum(&cat, v0, x, 6) - 3.0 * lambda().ln()).abs() < 1e-10);
    }
}

#[test]
fn orbit_cache_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.01);
    let first = cached_periodic_points(&map, 4, Some(dir.path())).unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(!files.is_empty());
    let second = cached_periodic_points(&map, 4, Some(dir.path())).unwrap();
    let fresh = enumerate_periodic_points(&map, 4).unwrap();
    assert_eq!(first.len(), fresh.len());
    assert_eq!(second.len(), fresh.len());
    for (a, b) in second.iter().zip(&fresh) {
        assert!(a.representative.torus_dist(&b.representative) < 1e-12);
        assert_eq!(a.deck_vectors, b.deck_vectors);
    }
    // deleting the cache changes nothing but runtime
    std::fs::remove_dir_all(dir.path()).unwrap();
    std::fs::create_dir_all(dir.path()).unwrap();
    let third = cached_periodic_points(&map, 4, Some(dir.path())).unwrap();
    assert_eq!(third.len(), fresh.len());
}

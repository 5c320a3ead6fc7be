use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonance_core::determinant::{determinant_zeros, dyn_determinant, orbit_sums, FlatTraceSeries};
use resonance_core::linalg::eigenvalues;
use resonance_core::operator_matrix::*;
use resonance_core::quantization::*;
use resonance_core::spectral::companion_from_roots;
use resonance_core::{c64, CMat, Error, PotentialSpec, SymplecticTorusMap, C64};

fn lambda() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

fn band(map: &SymplecticTorusMap, v: &PotentialSpec, n: usize, inner: f64) -> ExternalBand {
    let op = assemble(map, v, n, &EngineConfig::default()).unwrap();
    ExternalBand::new(map, &op, inner).unwrap()
}

fn external_spectrum(v: &PotentialSpec, n: usize) -> Vec<C64> {
    let op = assemble(&SymplecticTorusMap::cat(), v, n, &EngineConfig::default()).unwrap();
    let cut = 0.5 * lambda().powf(if matches!(v, PotentialSpec::Zero) { -0.5 } else { 0.0 });
    op.eigenvalues().unwrap().into_iter().filter(|z| z.norm() > cut).collect()
}

#[test]
fn symbol_algebra() {
    let a = Symbol::cosine([1, 0], 1.0);
    let b = Symbol::sine([1, 1], 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let x: [f64; 2] = [rng.gen(), rng.gen()];
        let tau = 2.0 * std::f64::consts::PI;
        let want = (tau * x[0]).cos() * 0.5 * (tau * (x[0] + x[1])).sin();
        assert!((a.product(&b).eval(x) - c64(want, 0.0)).norm() < 1e-14);
        assert!((a.add(&b).eval(x) - a.eval(x) - b.eval(x)).norm() < 1e-14);
        // ψ∘M⁻¹ evaluated at Mx gives ψ(x)
        let m = SymplecticTorusMap::cat().linear_part;
        let mx = [(2.0 * x[0] + x[1]).rem_euclid(1.0), (x[0] + x[1]).rem_euclid(1.0)];
        assert!((b.compose_linear_inverse(&m).eval(mx) - b.eval(x)).norm() < 1e-12);
    }
    assert_eq!(Symbol::constant(0.7).mean(), c64(0.7, 0.0));
    assert_eq!(a.mean(), c64(0.0, 0.0));
    assert_eq!(b.max_mode(), 1);
}

#[test]
fn quantizing_one_gives_the_identity() {
    for (eps, v) in [(0.0, PotentialSpec::Zero), (0.02, PotentialSpec::Reference)] {
        let map = SymplecticTorusMap::perturbed_cat(eps, eps);
        let inner = if eps == 0.0 { 0.4 } else { 0.7 };
        let b = band(&map, &v, 7, inner);
        assert_eq!(b.rank(), 7);
        let op = b.op_quantize(&Symbol::constant(1.0), None).unwrap();
        assert!(op.matrix.sub(&CMat::identity(7)).norm_max() < 1e-8);
        let tc = observable_trace_check(&op, &Symbol::constant(1.0));
        assert!(tc.gap < 1e-10);
    }
}

#[test]
fn semiclassical_trends() {
    let map = SymplecticTorusMap::perturbed_cat(0.02, 0.02);
    let symbols = [
        Symbol::cosine([1, 0], 1.0),
        Symbol::sine([1, 1], 1.0).add(&Symbol::constant(0.5)),
        Symbol::cosine([0, 1], 0.5).add(&Symbol::cosine([1, -1], 0.3)),
    ];
    let second = Symbol::cosine([1, 0], 1.0);
    let (mut herm, mut comp, mut trace) = (vec![], vec![], vec![]);
    let positive = Symbol::constant(0.5).add(&Symbol::cosine([1, 0], 0.5));
    for n in [10usize, 20, 40] {
        let b = band(&map, &PotentialSpec::Reference, n, 0.7);
        let opb = b.op_quantize(&second, None).unwrap();
        let mut h = vec![];
        let mut c = vec![];
        for s in &symbols {
            let op = b.op_quantize(s, None).unwrap();
            h.push(op.hermiticity_defect());
            let prod = b.op_quantize(&s.product(&second), None).unwrap();
            c.push(op.matrix.matmul(&opb.matrix).sub(&prod.matrix).norm_two());
        }
        herm.push(h);
        comp.push(c);
        let zero_mean = b.op_quantize(&Symbol::cosine([1, 0], 1.0), None).unwrap();
        trace.push(observable_trace_check(&zero_mean, &Symbol::cosine([1, 0], 1.0)).normalized_trace.norm());
        if n == 40 {
            let op = b.op_quantize(&positive, None).unwrap();
            let tc = observable_trace_check(&op, &positive);
            assert!((tc.normalized_trace.re - 0.5).abs() < 0.1);
        }
    }
    for s in 0..3 {
        assert!(herm[1][s] < herm[0][s] && herm[2][s] < herm[1][s], "hermiticity, symbol {s}: {herm:?}");
        assert!(comp[1][s] < comp[0][s] && comp[2][s] < comp[1][s], "composition, symbol {s}: {comp:?}");
    }
    assert!(trace[1] < trace[0] && trace[2] < trace[1], "{trace:?}");
}

#[test]
fn egorov_examples() {
    let cat = SymplecticTorusMap::cat();
    let b = band(&cat, &PotentialSpec::Zero, 10, 0.4);
    let one = Symbol::constant(1.0);
    assert!(egorov_residual(&b, &one, &one).unwrap() < 1e-12);
    let psi = Symbol::cosine([1, 1], 1.0);
    let r = egorov_residual(&b, &psi, &psi.compose_linear_inverse(&cat.linear_part)).unwrap();
    assert!(r < 1e-8, "{r:e}");
    // the identity is exact for every band-limited symbol on the linear model
    let mixed = Symbol::sine([2, -1], 0.4).add(&Symbol::cosine([0, 3], 0.2)).add(&Symbol::constant(-0.1));
    assert!(egorov_residual(&b, &mixed, &mixed.compose_linear_inverse(&cat.linear_part)).unwrap() < 1e-8);
    // a wrong push-forward is detected
    assert!(egorov_residual(&b, &psi, &psi).unwrap() > 1e-2);
    assert!(matches!(b.op_quantize(&Symbol::cosine([3, 0], 1.0), Some(4)), Err(Error::SymbolAliasing { .. })));
    assert!(b.op_quantize(&Symbol::cosine([2, 0], 1.0), Some(4)).is_ok());
}

#[test]
fn perturbed_egorov_improves_with_cutoff() {
    let pert = SymplecticTorusMap::perturbed_cat(0.03, 0.03);
    let psi = Symbol::cosine([1, 1], 1.0);
    let op = assemble(&pert, &PotentialSpec::Zero, 10, &EngineConfig { bands: 8, ..Default::default() }).unwrap();
    let b = ExternalBand::new(&pert, &op, 0.4).unwrap();
    let r: Vec<f64> = [1i64, 2, 4].iter().map(|&k| egorov_residual(&b, &psi, &psi.compose_inverse(&pert, 64, k)).unwrap()).collect();
    assert!(r[1] < r[0] && r[2] < r[1], "{r:?}");
}

#[test]
fn quantized_cat_map_is_unitary() {
    let cat = SymplecticTorusMap::cat();
    for n in [5usize, 6, 9, 16, 25, 40] {
        let u = quantized_cat_map(&cat, n).unwrap();
        assert_eq!(u.matrix.rows(), n);
        assert!(u.matrix.adjoint().matmul(&u.matrix).sub(&CMat::identity(n)).norm_max() < 1e-10);
        let det = resonance_core::linalg::Lu::new(&u.matrix).det();
        assert!((det.norm() - 1.0).abs() < 1e-10);
        let mut p = u.matrix.clone();
        for k in 1..=6 {
            let g = orbit_sums(&cat, &PotentialSpec::Reference, n, k, None).unwrap().gutzwiller;
            assert!((p.trace().norm() - g.norm()).abs() < 1e-6);
            p = p.matmul(&u.matrix);
        }
    }
    assert!(quantized_cat_map(&cat, 1).is_err());
}

#[test]
fn matching_examples() {
    let a = vec![c64(0.3, 0.1), c64(-0.2, 0.5), c64(0.0, -0.9)];
    let rep = spectral_match(&a, &a).unwrap();
    assert_eq!(rep.max_distance, 0.0);
    let mut rev = a.clone();
    rev.reverse();
    assert_eq!(spectral_match(&a, &rev).unwrap().max_distance, 0.0);
    assert!(matches!(spectral_match(&a, &a[..2]), Err(Error::CardinalityMismatch(3, 2))));
    // brute-force the optimal assignment for a small random cost matrix
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let cost: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.gen()).collect()).collect();
        let assign = hungarian(&cost);
        let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3, 4];
        permutations(&mut perm, 0, &mut |p| best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()));
        assert!((total - best).abs() < 1e-12);
    }
}

fn permutations(p: &mut [usize; 5], k: usize, f: &mut dyn FnMut(&[usize; 5])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn external_band_is_the_quantum_cat_map() {
    let cat = SymplecticTorusMap::cat();
    let s = lambda().sqrt();
    for n in [3usize, 7, 12] {
        let ev = eigenvalues(&quantized_cat_map(&cat, n).unwrap().matrix).unwrap();
        let b0 = external_spectrum(&PotentialSpec::Reference, n);
        assert!(spectral_match(&b0, &ev).unwrap().max_distance < 1e-3);
        let rescaled: Vec<C64> = external_spectrum(&PotentialSpec::Zero, n).iter().map(|z| z * s).collect();
        assert!(spectral_match(&rescaled, &ev).unwrap().max_distance < 1e-3);
    }
}

#[test]
fn uniqueness_via_traces() {
    // a random similarity leaves the power sums unchanged; matching recovers the spectrum
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let roots: Vec<C64> = (0..6).map(|_| c64(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9))).collect();
    let s = CMat::from_fn(6, 6, |i, j| c64(if i == j { 2.0 } else { 0.0 } + rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
    let a = s.matmul(&CMat::diag(&roots)).matmul(&resonance_core::linalg::inverse(&s).unwrap());
    let b = companion_from_roots(&roots);
    let traces = |m: &CMat| {
        let mut p = m.clone();
        (1..=10)
            .map(|_| {
                let t = p.trace();
                p = p.matmul(m);
                t
            })
            .collect::<Vec<_>>()
    };
    let (ta, tb) = (traces(&a), traces(&b));
    assert!(ta.iter().zip(&tb).all(|(x, y)| (x - y).norm() < 1e-8));
    let d = dyn_determinant(&FlatTraceSeries::from_traces(ta));
    let za: Vec<C64> = determinant_zeros(&d, d.reliability_radius).unwrap().iter().map(|z| z.z).collect();
    let zb = eigenvalues(&b).unwrap();
    assert!(spectral_match(&za, &zb).unwrap().max_distance < 1e-4);
}

#[test]
fn correlation_examples() {
    let cat = SymplecticTorusMap::cat();
    let op = assemble(&cat, &PotentialSpec::Reference, 5, &EngineConfig::default()).unwrap();
    let pi = external_projector(&op.matrix, 0.7, f64::INFINITY).unwrap();
    let dim = op.matrix.rows();
    let bands = op.basis.bands;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // band-limited: only the first three transverse modes are populated
    let mut random = || -> Vec<C64> {
        (0..dim).map(|i| if i % bands < 3 { c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) } else { c64(0.0, 0.0) }).collect()
    };
    let (u, v) = (random(), random());
    let ns: Vec<usize> = (0..=10).collect();

    let inside = pi.matvec(&u);
    let rep = correlation_decay(&op.matrix, &pi, &inside, &v, &ns);
    assert!(rep.residuals.iter().all(|r| *r < 1e-8));

    let rep = correlation_decay(&op.matrix, &pi, &u, &v, &ns);
    let direct: C64 = v.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
    assert!((rep.full[0] - direct).norm() < 1e-14);
    let rate = rep.fitted_rate.unwrap();
    assert!(rate <= (1.0 / lambda()).ln() + 0.1, "{rate}");
}

//! Quantum observables `Op(ψ) = Π M(ψ) Π` on the external band, the exact
//! Egorov identity, trace laws, the generating-function quantum cat map and
//! spectral matching.

use crate::dynamics::{IMat2, SymplecticTorusMap};
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, CMat};
use crate::operator_matrix::heisenberg::Heisenberg;
use crate::operator_matrix::transverse::Transverse;
use crate::operator_matrix::{external_projector, multiplication_operator, OperatorMatrix};
use crate::{c64, cis, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A trigonometric polynomial `ψ(x) = Σ ψ_k e^{i2πk·x}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    pub tag: String,
    pub modes: Vec<([i64; 2], C64)>,
}

impl Symbol {
    pub fn constant(c: f64) -> Self {
        Symbol { tag: format!("const:{c}"), modes: vec![([0, 0], c64(c, 0.0))] }
    }

    /// `amp · cos 2π(k·x)`
    pub fn cosine(k: [i64; 2], amp: f64) -> Self {
        let half = c64(0.5 * amp, 0.0);
        Symbol { tag: format!("{amp}*cos[{},{}]", k[0], k[1]), modes: vec![(k, half), ([-k[0], -k[1]], half)] }
    }

    /// `amp · sin 2π(k·x)`
    pub fn sine(k: [i64; 2], amp: f64) -> Self {
        Symbol {
            tag: format!("{amp}*sin[{},{}]", k[0], k[1]),
            modes: vec![(k, c64(0.0, -0.5 * amp)), ([-k[0], -k[1]], c64(0.0, 0.5 * amp))],
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> C64 {
        self.modes
            .iter()
            .map(|(k, c)| c * cis(2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1])))
            .sum()
    }

    pub fn mean(&self) -> C64 {
        self.modes.iter().filter(|(k, _)| *k == [0, 0]).map(|(_, c)| *c).sum()
    }

    pub fn max_mode(&self) -> i64 {
        self.modes.iter().map(|(k, _)| k[0].abs().max(k[1].abs())).max().unwrap_or(0)
    }

    pub fn product(&self, other: &Symbol) -> Symbol {
        let mut acc: std::collections::BTreeMap<[i64; 2], C64> = Default::default();
        for (k, a) in &self.modes {
            for (l, b) in &other.modes {
                *acc.entry([k[0] + l[0], k[1] + l[1]]).or_insert(c64(0.0, 0.0)) += a * b;
            }
        }
        Symbol { tag: format!("({})*({})", self.tag, other.tag), modes: acc.into_iter().filter(|(_, c)| c.norm() > 0.0).collect() }
    }

    pub fn add(&self, other: &Symbol) -> Symbol {
        let mut acc: std::collections::BTreeMap<[i64; 2], C64> = std::collections::BTreeMap::new();
        for (k, c) in self.modes.iter().chain(&other.modes) {
            *acc.entry(*k).or_insert(c64(0.0, 0.0)) += c;
        }
        Symbol { tag: format!("{}+{}", self.tag, other.tag), modes: acc.into_iter().filter(|(_, c)| c.norm() > 0.0).collect() }
    }

    /// Exact composition with the inverse of a linear map: `k ↦ k M⁻¹`.
    pub fn compose_linear_inverse(&self, m: &IMat2) -> Symbol {
        let inv = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
        let modes = self
            .modes
            .iter()
            .map(|(k, c)| ([k[0] * inv[0][0] + k[1] * inv[1][0], k[0] * inv[0][1] + k[1] * inv[1][1]], *c))
            .collect();
        Symbol { tag: format!("{}∘M⁻¹", self.tag), modes }
    }

    /// `ψ ∘ f⁻¹` by sampling on an `m × m` grid, truncated to modes `|k|∞ ≤ cutoff`.
    pub fn compose_inverse(&self, map: &SymplecticTorusMap, m: usize, cutoff: i64) -> Symbol {
        if map.is_linear() {
            return self.compose_linear_inverse(&map.linear_part);
        }
        let samples: Vec<C64> = (0..m * m)
            .map(|idx| {
                let x = [(idx / m) as f64 / m as f64, (idx % m) as f64 / m as f64];
                self.eval(map.lift_inverse(x))
            })
            .collect();
        let c = crate::numerics::fourier_coefficients(&samples, m);
        let mut modes = Vec::new();
        for kq in -cutoff..=cutoff {
            for kp in -cutoff..=cutoff {
                let v = c[crate::numerics::freq_index(kq, m) * m + crate::numerics::freq_index(kp, m)];
                if v.norm() > 1e-15 {
                    modes.push(([kq, kp], v));
                }
            }
        }
        Symbol { tag: format!("{}∘f⁻¹", self.tag), modes }
    }
}

/// Orthonormal basis of the range of a projector (pivoted Gram–Schmidt with
/// re-orthogonalisation), of dimension `round(Tr Π)`.
pub fn range_basis(pi: &CMat) -> Result<CMat> {
    let d = pi.rows();
    let rank = pi.trace().re.round() as usize;
    let mut cols: Vec<Vec<C64>> = (0..d).map(|j| pi.column(j)).collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (j, nr) = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (j, vec_norm(c)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
            .ok_or(Error::Singular)?;
        if nr < 1e-10 {
            return Err(Error::Singular);
        }
        let mut q = cols[j].clone();
        for _ in 0..2 {
            for b in &basis {
                let p: C64 = b.iter().zip(&q).map(|(x, y)| x.conj() * y).sum();
                q.iter_mut().zip(b).for_each(|(y, x)| *y -= p * x);
            }
        }
        let n = vec_norm(&q);
        q.iter_mut().for_each(|x| *x /= n);
        for c in cols.iter_mut() {
            let p: C64 = q.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
            c.iter_mut().zip(&q).for_each(|(y, x)| *y -= p * x);
        }
        basis.push(q);
    }
    let mut out = CMat::zeros(d, rank);
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    Ok(out)
}

/// External band of an assembled operator: projector, orthonormal range basis,
/// and the Heisenberg/transverse data to build observables.
pub struct ExternalBand {
    pub pi: CMat,
    pub q: CMat,
    pub heisenberg: Heisenberg,
    pub transverse: Transverse,
    /// `Q* F Q`, the quantum operator on the range of Π.
    pub f_restricted: CMat,
}

impl ExternalBand {
    /// Band-0 projector of `op`, enclosing moduli above `inner`.
    pub fn new(map: &SymplecticTorusMap, op: &OperatorMatrix, inner: f64) -> Result<Self> {
        let pi = external_projector(&op.matrix, inner, f64::INFINITY)?;
        let q = range_basis(&pi)?;
        let f_restricted = q.adjoint().matmul(&op.matrix).matmul(&q);
        Ok(ExternalBand {
            pi,
            q,
            heisenberg: Heisenberg::for_map(map, op.basis.n)?,
            transverse: Transverse::new(map, op.basis.n, op.basis.bands),
            f_restricted,
        })
    }

    pub fn rank(&self) -> usize {
        self.q.cols()
    }

    pub fn multiplication(&self, psi: &Symbol) -> CMat {
        multiplication_operator(&self.heisenberg, &self.transverse, &psi.modes)
    }

    /// `Π M(ψ) Π` restricted to range(Π), in the basis `Q`.
    pub fn op_quantize(&self, psi: &Symbol, mode_limit: Option<i64>) -> Result<QuantumObservable> {
        if let Some(k) = mode_limit {
            if psi.max_mode() > k / 2 {
                return Err(Error::SymbolAliasing { modes: psi.max_mode(), cutoff: k / 2 });
            }
        }
        let m = self.multiplication(psi);
        let full = self.pi.matmul(&m).matmul(&self.pi);
        let restricted = self.q.adjoint().matmul(&full).matmul(&self.q);
        Ok(QuantumObservable { n: self.heisenberg.dim(), tag: psi.tag.clone(), matrix: restricted })
    }
}

#[derive(Clone, Debug)]
pub struct QuantumObservable {
    pub n: usize,
    pub tag: String,
    pub matrix: CMat,
}

impl QuantumObservable {
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.sub(&self.matrix.adjoint()).norm_two()
    }
}

/// `‖F̂ Op(ψ) − Op(ψ∘f⁻¹) F̂‖` on range(Π).
pub fn egorov_residual(band: &ExternalBand, psi: &Symbol, psi_pushed: &Symbol) -> Result<f64> {
    let a = band.op_quantize(psi, None)?;
    let b = band.op_quantize(psi_pushed, None)?;
    let f = &band.f_restricted;
    Ok(f.matmul(&a.matrix).sub(&b.matrix.matmul(f)).norm_two())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceCheck {
    #[serde(rename = "N")]
    pub n: usize,
    pub normalized_trace: C64,
    pub integral: C64,
    pub gap: f64,
}

/// `(1/N) Tr Op(ψ)` against `∫ψ`.
pub fn observable_trace_check(op: &QuantumObservable, psi: &Symbol) -> TraceCheck {
    let t = op.matrix.trace() / op.n as f64;
    let m = psi.mean();
    TraceCheck { n: op.n, normalized_trace: t, integral: m, gap: (t - m).norm() }
}

#[derive(Clone, Debug)]
pub struct QuantizedCatMap {
    pub n: usize,
    pub matrix: CMat,
    /// Floquet shifts of the row and column indices.
    pub shifts: [f64; 2],
}

fn generating_function_matrix(m: &IMat2, n: usize, shifts: [f64; 2]) -> CMat {
    let (a, b, d) = (m[0][0] as f64, m[0][1] as f64, m[1][1] as f64);
    let nf = n as f64;
    let norm = 1.0 / (nf * b.abs()).sqrt();
    CMat::from_fn(n, n, |j, k| {
        let jj = j as f64 + shifts[0];
        let kk = k as f64 + shifts[1];
        cis(PI / (nf * b) * (d * jj * jj - 2.0 * jj * kk + a * kk * kk)) * norm
    })
}

/// Generating-function quantization of the linear part (`b = M₀₁ = ±1`). The
/// Floquet shifts are chosen among `{0, ½}²` so that `Tr Uⁿ` reproduces the
/// orbit sums `G_n` for `n ≤ 4`; the global phase is fixed by `Tr U = G_1`.
pub fn quantized_cat_map(map: &SymplecticTorusMap, n: usize) -> Result<QuantizedCatMap> {
    if n < 2 {
        return Err(Error::InvalidMap("quantized cat map needs N ≥ 2".into()));
    }
    let m = map.linear_part;
    if m[0][1].abs() != 1 {
        return Err(Error::InvalidMap("generating-function quantization implemented for |M₀₁| = 1".into()));
    }
    let lin = SymplecticTorusMap { eps1: 0.0, eps2: 0.0, ..map.clone() };
    let g: Vec<C64> = (1..=4)
        .map(|p| crate::determinant::orbit_sums(&lin, &crate::prequantum::PotentialSpec::Reference, n, p, None).map(|s| s.gutzwiller))
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, QuantizedCatMap)> = None;
    for shifts in [[0.0, 0.0], [0.0, 0.5], [0.5, 0.0], [0.5, 0.5]] {
        let mut u = generating_function_matrix(&m, n, shifts);
        let tr = u.trace();
        if tr.norm() < 1e-8 {
            continue;
        }
        let ph = (g[0] / g[0].norm()) / (tr / tr.norm());
        u.scale_mut(ph);
        let mut p = u.clone();
        let mut err: f64 = (p.trace() - g[0]).norm();
        for gn in &g[1..] {
            p = p.matmul(&u);
            err = err.max((p.trace() - gn).norm());
        }
        if best.as_ref().map_or(true, |(e, _)| err < *e) {
            best = Some((err, QuantizedCatMap { n, matrix: u, shifts }));
        }
    }
    best.map(|(_, q)| q).ok_or(Error::Singular)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<(C64, C64)>,
    pub max_distance: f64,
    pub max_modulus_error: f64,
    pub max_argument_error: f64,
}

/// Minimum-cost assignment (Hungarian algorithm, O(n³)) for a square cost matrix.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn arg_diff(a: C64, b: C64) -> f64 {
    let d = (a.arg() - b.arg()).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Optimal bipartite matching by complex distance.
pub fn spectral_match(a: &[C64], b: &[C64]) -> Result<MatchReport> {
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch(a.len(), b.len()));
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    let assign = hungarian(&cost);
    let pairs: Vec<(C64, C64)> = assign.iter().enumerate().map(|(i, &j)| (a[i], b[j])).collect();
    let max_distance = pairs.iter().map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let max_modulus_error = pairs.iter().map(|(x, y)| (x.norm() - y.norm()).abs()).fold(0.0, f64::max);
    let max_argument_error = pairs.iter().map(|(x, y)| arg_diff(*x, *y)).fold(0.0, f64::max);
    Ok(MatchReport { pairs, max_distance, max_modulus_error, max_argument_error })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_values: Vec<usize>,
    pub full: Vec<C64>,
    pub band0: Vec<C64>,
    pub residuals: Vec<f64>,
    pub fitted_rate: Option<f64>,
}

/// `⟨v, Fⁿu⟩` against the band-0 prediction `⟨v, Fⁿ Π u⟩`.
pub fn correlation_decay(f: &CMat, pi: &CMat, u: &[C64], v: &[C64], n_values: &[usize]) -> CorrelationReport {
    let pu = pi.matvec(u);
    let nmax = n_values.iter().copied().max().unwrap_or(0);
    let (mut a, mut b) = (u.to_vec(), pu);
    let (mut full, mut band0, mut residuals) = (vec![], vec![], vec![]);
    let inner = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(p, q)| p.conj() * q).sum() };
    for n in 0..=nmax {
        if n_values.contains(&n) {
            let cf = inner(v, &a);
            let cb = inner(v, &b);
            full.push(cf);
            band0.push(cb);
            residuals.push((cf - cb).norm());
        }
        a = f.matvec(&a);
        b = f.matvec(&b);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = n_values
        .iter()
        .zip(&residuals)
        .filter(|(_, r)| **r > 1e-300)
        .map(|(n, r)| (*n as f64, r.ln()))
        .unzip();
    let fitted_rate = (xs.len() >= 2).then(|| crate::numerics::fit_slope(&xs, &ys));
    CorrelationReport { n_values: n_values.to_vec(), full, band0, residuals, fitted_rate }
}

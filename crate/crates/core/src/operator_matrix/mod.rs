//! Finite matrix of the prequantum transfer operator `F̂_N`.
//!
//! Sections are expanded in `H_N ⊗ C^B`: the N-dimensional band-0 space with its
//! magnetic translations (see [`heisenberg`]) tensored with B transverse bands
//! (see [`transverse`]). The linear part acts as `Û ⊗ diag(λ^{−1/2−k})`; each shear
//! is the time-one flow of its Hamiltonian, whose generator is assembled from
//! Fourier modes; the potential acts as multiplication by `e^V`.

pub mod heisenberg;
pub mod transverse;

use crate::dynamics::SymplecticTorusMap;
use crate::error::{Error, Result};
use crate::linalg::{expm, CMat, Lu};
use crate::numerics::{fourier_coefficients, freq_index};
use crate::prequantum::{check_lift_conditions, evaluate_potential, Gauge, PotentialSpec};
use crate::{c64, cis, TorusPoint, C64};
use heisenberg::Heisenberg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use transverse::{shear_modes, Transverse};

/// Basis data of the discretization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionBasis {
    pub n: usize,
    pub bands: usize,
    pub r: f64,
    pub gauge: Gauge,
    pub kappa: [f64; 2],
    /// Diagonal weight per transverse band (index `j·B + k` carries `weights[k]`).
    pub weights: Vec<f64>,
}

impl SectionBasis {
    pub fn dim(&self) -> usize {
        self.n * self.bands
    }

    pub fn full_weights(&self) -> Vec<f64> {
        (0..self.n).flat_map(|_| self.weights.iter().copied()).collect()
    }
}

/// Escape-type weight: bands deeper in the stable direction get `⟨k⟩^{r}`.
pub fn band_weight(k: usize, r: f64) -> f64 {
    (1.0 + (k * k) as f64).sqrt().powf(r)
}

pub fn build_basis(map: &SymplecticTorusMap, n: usize, bands: usize, r: f64) -> Result<SectionBasis> {
    if n == 0 || bands == 0 {
        return Err(Error::InvalidMap("N and the band count must be positive".into()));
    }
    let kap = crate::prequantum::kappa(map)?;
    Ok(SectionBasis {
        n,
        bands,
        r,
        gauge: Gauge::Symmetric,
        kappa: kap.value(),
        weights: (0..bands).map(|k| band_weight(k, r)).collect(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineConfig {
    pub bands: usize,
    pub grid_m: usize,
    pub r: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { bands: 6, grid_m: 32, r: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub basis: SectionBasis,
    pub grid_m: usize,
    pub map_hash: String,
    pub potential_tag: String,
    /// Unweighted matrix in the orthonormal basis.
    pub matrix: CMat,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.basis.n
    }

    /// `W A W⁻¹` with the diagonal basis weights.
    pub fn weighted(&self) -> CMat {
        let w = self.basis.full_weights();
        let mut m = self.matrix.clone();
        let d = m.rows();
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] *= w[i] / w[j];
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        crate::linalg::eigenvalues(&self.matrix)
    }
}

/// `Σ_k ĉ_k T(k) ⊗ X_k`, with `X_k` supplied per mode.
fn heisenberg_sum(h: &Heisenberg, modes: &[([i64; 2], C64)], transverse: impl Fn([i64; 2]) -> CMat + Sync, bands: usize) -> CMat {
    let n = h.dim();
    let d = n * bands;
    let parts: Vec<CMat> = modes
        .par_iter()
        .map(|&(k, c)| {
            let t = h.t(k);
            let x = transverse(k);
            let mut out = CMat::zeros(d, d);
            for j in 0..n {
                let ph = t.phase[j] * c;
                let i = t.target[j];
                for a in 0..bands {
                    for b in 0..bands {
                        out[(i * bands + a, j * bands + b)] = ph * x[(a, b)];
                    }
                }
            }
            out
        })
        .collect();
    let mut total = CMat::zeros(d, d);
    for p in &parts {
        total.axpy(c64(1.0, 0.0), p);
    }
    total
}

/// Generator of the flow of a Hamiltonian given by its Fourier modes.
pub fn hamiltonian_generator(h: &Heisenberg, t: &Transverse, modes: &[([i64; 2], C64)]) -> CMat {
    heisenberg_sum(h, modes, |k| t.generator_factor(k), t.bands())
}

/// Multiplication by a function given by its Fourier modes.
pub fn multiplication_operator(h: &Heisenberg, t: &Transverse, modes: &[([i64; 2], C64)]) -> CMat {
    heisenberg_sum(h, modes, |k| t.w(k), t.bands())
}

/// Fourier modes of `g` sampled on an `m × m` grid; coefficients below `tol`
/// (relative to the largest) are dropped. Errors if the upper half of the
/// spectrum carries more than 1e-8 of the energy.
pub fn sampled_modes(g: impl Fn([f64; 2]) -> Result<f64> + Sync, m: usize, tol: f64) -> Result<Vec<([i64; 2], C64)>> {
    let samples: Vec<C64> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let x = [(idx / m) as f64 / m as f64, (idx % m) as f64 / m as f64];
            g(x).map(|v| c64(v, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|s| !s.re.is_finite()) {
        return Err(Error::NonFinite("potential samples".into()));
    }
    let c = fourier_coefficients(&samples, m);
    let half = (m / 2) as i64;
    let quarter = (m / 4) as i64;
    let mut total = 0.0;
    let mut high = 0.0;
    let mut out = Vec::new();
    let cmax = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for kq in -half + 1..half {
        for kp in -half + 1..half {
            let v = c[freq_index(kq, m) * m + freq_index(kp, m)];
            let e = v.norm_sqr();
            total += e;
            if kq.abs() > quarter || kp.abs() > quarter {
                high += e;
            }
            if v.norm() > tol * cmax {
                out.push(([kq, kp], v));
            }
        }
    }
    if total > 0.0 && high > 1e-8 * total {
        return Err(Error::AliasingDetected(high / total));
    }
    Ok(out)
}

/// Relative size below which sampled Fourier coefficients are treated as
/// sampling noise (the reference potential is resolved to ~1e-12); high bands
/// amplify such modes enormously.
pub const MODE_NOISE_FLOOR: f64 = 1e-11;

/// `e^V` as an operator. Constant potentials are applied exactly.
pub fn potential_operator(map: &SymplecticTorusMap, h: &Heisenberg, t: &Transverse, v: &PotentialSpec, grid_m: usize) -> Result<Option<CMat>> {
    if v.as_constant().is_some() {
        return Ok(None);
    }
    if map.is_linear() && v.reference_count() > 0 && matches!(v, PotentialSpec::Reference) {
        return Ok(None);
    }
    let modes = sampled_modes(|x| evaluate_potential(v, map, TorusPoint::new(x[0], x[1])).map(f64::exp), grid_m, MODE_NOISE_FLOOR)?;
    let kept = drop_amplified_tail(t, modes);
    Ok(Some(multiplication_operator(h, t, &kept)))
}

/// Potential modes below this fraction of `|c_0|` may be dropped when amplified.
pub const TAIL_COEFFICIENT: f64 = 1e-6;
/// Largest admissible `|c_k| ‖W(k)‖` for a tail mode, relative to `|c_0|`.
pub const AMPLIFICATION_BUDGET: f64 = 1e-2;

/// Drop small Fourier modes that the transverse factor `W(k)` amplifies past
/// the budget. Potentials of finite smoothness (V₀ of a perturbed map is only
/// C^{1+α}) have slowly decaying tails, and the higher bands amplify them like
/// `(|k|√ℏ)^B/B!`; kept, they swamp the truncated operator, dropped, they move
/// the low bands by at most ~`TAIL_COEFFICIENT` each.
pub fn drop_amplified_tail(t: &Transverse, modes: Vec<([i64; 2], C64)>) -> Vec<([i64; 2], C64)> {
    let c0 = modes.iter().find(|(k, _)| *k == [0, 0]).map_or(0.0, |(_, c)| c.norm());
    modes
        .into_iter()
        .filter(|(k, c)| c.norm() >= TAIL_COEFFICIENT * c0 || c.norm() * t.w(*k).norm_max() <= AMPLIFICATION_BUDGET * c0)
        .collect()
}

fn constant_factor(map: &SymplecticTorusMap, v: &PotentialSpec) -> f64 {
    if let Some(c) = v.as_constant() {
        return c.exp();
    }
    if map.is_linear() && matches!(v, PotentialSpec::Reference) {
        return map.linear_eigen().0.sqrt();
    }
    1.0
}

/// Assemble the matrix of `F̂_N` for the given map and potential.
pub fn assemble(map: &SymplecticTorusMap, v: &PotentialSpec, n: usize, cfg: &EngineConfig) -> Result<OperatorMatrix> {
    map.validate()?;
    let lift = check_lift_conditions(map);
    if !lift.pass {
        return Err(Error::InvalidMap(format!("no equivariant lift: det(M−I) = {}", lift.det_m_minus_i)));
    }
    let basis = build_basis(map, n, cfg.bands, cfg.r)?;
    let h = Heisenberg::for_map(map, n)?;
    let t = Transverse::new(map, n, cfg.bands);
    let u = h.metaplectic(&map.linear_part)?;
    let dvec: Vec<C64> = t.linear_multipliers().into_iter().map(|x| c64(x, 0.0)).collect();
    let mut f = u.kron(&CMat::diag(&dvec));
    for s in map.shears() {
        if s.amplitude() == 0.0 {
            continue;
        }
        let g = hamiltonian_generator(&h, &t, &shear_modes(s));
        f = expm(&g).matmul(&f);
    }
    if let Some(ev) = potential_operator(map, &h, &t, v, cfg.grid_m)? {
        f = ev.matmul(&f);
    }
    let c = constant_factor(map, v);
    if c != 1.0 {
        f.scale_mut(c64(c, 0.0));
    }
    if !f.is_finite() {
        return Err(Error::NonFinite("assembled operator".into()));
    }
    Ok(OperatorMatrix { basis, grid_m: cfg.grid_m, map_hash: map.map_hash(), potential_tag: v.tag(), matrix: f })
}

/// Riesz projector `(1/2πi)∮_{|z|=r}(z − A)⁻¹ dz` by the trapezoid rule,
/// refined until two successive point counts agree to 1e-12.
pub fn riesz_projector(a: &CMat, radius: f64) -> Result<CMat> {
    let d = a.rows();
    let eval = |pts: usize| -> Result<CMat> {
        let parts: Vec<Result<CMat>> = (0..pts)
            .into_par_iter()
            .map(|j| {
                let z = cis(2.0 * PI * (j as f64 + 0.5) / pts as f64) * radius;
                let mut m = a.scale(c64(-1.0, 0.0));
                for i in 0..d {
                    m[(i, i)] += z;
                }
                let lu = Lu::new(&m);
                if lu.is_singular() {
                    return Err(Error::NoGap(radius));
                }
                Ok(lu.inverse().scale(z / pts as f64))
            })
            .collect();
        let mut acc = CMat::zeros(d, d);
        for p in parts {
            acc.axpy(c64(1.0, 0.0), &p?);
        }
        Ok(acc)
    };
    let mut pts = 64;
    let mut prev = eval(pts)?;
    while pts < 4096 {
        pts *= 2;
        let cur = eval(pts)?;
        let diff = cur.sub(&prev).norm_max();
        if diff < 1e-12 * cur.norm_max().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NoGap(radius))
}

/// Spectral projector onto the eigenvalues with modulus in `(inner, outer)`;
/// `outer = ∞` is allowed.
pub fn external_projector(a: &CMat, inner: f64, outer: f64) -> Result<CMat> {
    let ev = crate::linalg::eigenvalues(a)?;
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    for z in &ev {
        let m = z.norm();
        if (m - inner).abs() < 1e-6 * scale.max(1.0) {
            return Err(Error::NoGap(inner));
        }
        if outer.is_finite() && (m - outer).abs() < 1e-6 * scale.max(1.0) {
            return Err(Error::NoGap(outer));
        }
    }
    let d = a.rows();
    let inside_inner = riesz_projector(a, inner)?;
    let outer_part = if outer.is_finite() { riesz_projector(a, outer)? } else { CMat::identity(d) };
    Ok(outer_part.sub(&inside_inner))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub bands: usize,
    #[serde(rename = "M")]
    pub grid_m: usize,
    pub r: f64,
    pub map_hash: String,
    pub potential_tag: String,
    pub rows: usize,
    pub cols: usize,
}

const MAGIC: &[u8; 8] = b"RPOMAT01";

/// Binary snapshot (length-prefixed JSON header, then row-major little-endian
/// complex doubles) plus a `.json` sidecar with the header.
pub fn write_snapshot(path: &Path, m: &OperatorMatrix) -> Result<()> {
    let header = SnapshotHeader {
        n: m.basis.n,
        bands: m.basis.bands,
        grid_m: m.grid_m,
        r: m.basis.r,
        map_hash: m.map_hash.clone(),
        potential_tag: m.potential_tag.clone(),
        rows: m.matrix.rows(),
        cols: m.matrix.cols(),
    };
    let hjson = serde_json::to_vec(&header)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&(hjson.len() as u64).to_le_bytes())?;
    f.write_all(&hjson)?;
    for z in m.matrix.as_slice() {
        f.write_all(&z.re.to_le_bytes())?;
        f.write_all(&z.im.to_le_bytes())?;
    }
    f.flush()?;
    std::fs::write(path.with_extension("json"), serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, CMat)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ConfigInvalid { path: path.display().to_string(), reason: "not a matrix snapshot".into() });
    }
    let mut len = [0u8; 8];
    f.read_exact(&mut len)?;
    let mut hbuf = vec![0u8; u64::from_le_bytes(len) as usize];
    f.read_exact(&mut hbuf)?;
    let header: SnapshotHeader = serde_json::from_slice(&hbuf)?;
    let mut data = Vec::with_capacity(header.rows * header.cols);
    let mut buf = [0u8; 16];
    for _ in 0..header.rows * header.cols {
        f.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        data.push(c64(re, im));
    }
    Ok((header.clone(), CMat::from_row_major(header.rows, header.cols, data)))
}

//! Resonance sets, truncation-stability filtering, band radii and
//! classification, Weyl counts and equidistribution statistics.

use crate::dynamics::{enumerate_periodic_points, matvec2, unstable_direction, SymplecticTorusMap, TorusPoint};
use crate::error::{Error, Result};
use crate::linalg::{eigen, CMat, Eigen};
use crate::operator_matrix::{assemble, EngineConfig};
use crate::prequantum::{orbit_potential_sum, orbit_reference_sum, reference_potential, PotentialSpec, SPLITTING_DEPTH};
use crate::{c64, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    #[serde(flatten, with = "complex_fields")]
    pub z: C64,
    pub band: Option<usize>,
    pub stability: f64,
}

mod complex_fields {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        ReIm { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let r = ReIm::deserialize(d)?;
        Ok(C64::new(r.re, r.im))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    #[serde(rename = "N")]
    pub n: usize,
    pub engine: String,
    pub potential: String,
    pub items: Vec<Resonance>,
}

/// Modulus descending (ties within 1e-9), then argument ascending.
pub fn resonance_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > 1e-9 * ma.max(mb).max(1e-300) {
        mb.partial_cmp(&ma).expect("finite modulus")
    } else {
        a.arg().partial_cmp(&b.arg()).expect("finite argument")
    }
}

impl ResonanceSet {
    pub fn new(n: usize, engine: &str, potential: &str, mut items: Vec<Resonance>) -> Self {
        items.sort_by(|a, b| resonance_order(&a.z, &b.z));
        ResonanceSet { n, engine: engine.into(), potential: potential.into(), items }
    }

    pub fn values(&self) -> Vec<C64> {
        self.items.iter().map(|r| r.z).collect()
    }

    pub fn band(&self, k: usize) -> Vec<C64> {
        self.items.iter().filter(|r| r.band == Some(k)).map(|r| r.z).collect()
    }

    pub fn band_count(&self, k: usize) -> usize {
        self.items.iter().filter(|r| r.band == Some(k)).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,modulus,argument,band\n");
        for r in &self.items {
            let band = r.band.map(|b| b.to_string()).unwrap_or_default();
            s.push_str(&format!("{:.15e},{:.15e},{:.15e},{:.15e},{}\n", r.z.re, r.z.im, r.z.norm(), r.z.arg(), band));
        }
        s
    }
}

/// Eigenvalues (and optionally eigenvectors) in resonance order, with residual check.
pub fn eigendecompose(a: &CMat, want_vectors: bool) -> Result<Eigen> {
    let e = eigen(a, want_vectors)?;
    let n = a.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| resonance_order(&e.values[i], &e.values[j]));
    let values: Vec<C64> = idx.iter().map(|&i| e.values[i]).collect();
    let vectors = match e.vectors {
        Some(v) => {
            let scale = a.norm_max().max(1e-300) * (n as f64);
            let mut out = CMat::zeros(n, n);
            for (new, &old) in idx.iter().enumerate() {
                let x = v.column(old);
                let ax = a.matvec(&x);
                let r: f64 = ax.iter().zip(&x).map(|(p, q)| (p - e.values[old] * q).norm_sqr()).sum::<f64>().sqrt();
                if r > 1e-8 * scale {
                    return Err(Error::NoConvergence(new));
                }
                out.set_column(new, &x);
            }
            Some(out)
        }
        None => None,
    };
    Ok(Eigen { values, vectors })
}

/// Keep eigenvalues of the K truncation whose nearest neighbour in the 2K
/// truncation lies within `tol`; the refined value is reported.
pub fn resonance_filter(spec_k: &[C64], spec_2k: &[C64], tol: f64) -> Vec<Resonance> {
    let mut used = vec![false; spec_2k.len()];
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..spec_k.len()).collect();
    order.sort_by(|&i, &j| resonance_order(&spec_k[i], &spec_k[j]));
    for i in order {
        let z = spec_k[i];
        let best = spec_2k
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (w - z).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"));
        if let Some((j, d)) = best {
            if d < tol {
                used[j] = true;
                out.push(Resonance { z: spec_2k[j], band: None, stability: 1.0 - d / tol });
            }
        }
    }
    out
}

pub const DEFAULT_FILTER_TOL: f64 = 1e-4;

/// Matrix-engine resonances at N: B and 2B bands, filtered, band-classified.
pub fn matrix_resonances(map: &SymplecticTorusMap, v: &PotentialSpec, n: usize, cfg: &EngineConfig, tol: f64) -> Result<ResonanceSet> {
    let coarse = assemble(map, v, n, cfg)?;
    let fine_cfg = EngineConfig { bands: 2 * cfg.bands, ..cfg.clone() };
    let fine = assemble(map, v, n, &fine_cfg)?;
    let (a, b) = rayon::join(|| coarse.eigenvalues(), || fine.eigenvalues());
    let items = resonance_filter(&a?, &b?, tol);
    Ok(ResonanceSet::new(n, "matrix", &v.tag(), items))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPrediction {
    pub k: usize,
    pub r_minus: f64,
    pub r_plus: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandRadiiConfig {
    pub n_avg: usize,
    pub samples: usize,
    pub max_period: usize,
    pub seed: u64,
}

impl Default for BandRadiiConfig {
    fn default() -> Self {
        BandRadiiConfig { n_avg: 20, samples: 500, max_period: 6, seed: 7 }
    }
}

/// `(V_n, log‖Dfⁿ|E_u‖)` along a trajectory of length `n` from `x`.
fn trajectory_sums(map: &SymplecticTorusMap, v: &PotentialSpec, x: TorusPoint, n: usize) -> Result<(f64, f64)> {
    let mut e = unstable_direction(map, x, SPLITTING_DEPTH)?.e_u;
    let mut y = x;
    let (mut vn, mut log_exp) = (0.0, 0.0);
    let r = v.reference_count() as f64;
    for _ in 0..n {
        let img = matvec2(&map.differential(y), e);
        let nr = img[0].hypot(img[1]);
        vn += v.explicit_part(y.as_array()) + r * 0.5 * nr.ln();
        log_exp += nr.ln();
        e = [img[0] / nr, img[1] / nr];
        y = map.apply(y);
    }
    Ok((vn, log_exp))
}

/// Estimates of `r_k^∓` as inf/sup over sampled trajectories and short periodic
/// orbits of `exp((V_n − V₀_n)/n) ‖Dfⁿ|E_u‖^{−k/n}`.
pub fn compute_band_radii(map: &SymplecticTorusMap, v: &PotentialSpec, k: usize, cfg: &BandRadiiConfig) -> Result<BandPrediction> {
    let kf = k as f64;
    let value = |vn: f64, log_exp: f64, n: f64| ((vn - 0.5 * log_exp) / n - kf * log_exp / n).exp();
    if map.is_linear() && v.as_constant().is_some() || map.is_linear() && matches!(v, PotentialSpec::Reference) {
        let l = map.linear_eigen().0.ln();
        let c = v.as_constant().unwrap_or(0.5 * l);
        let r = value(c, l, 1.0);
        return Ok(BandPrediction { k, r_minus: r, r_plus: r, n: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<TorusPoint> = (0..cfg.samples).map(|_| TorusPoint::new(rng.gen(), rng.gen())).collect();
    let mut vals: Vec<f64> = starts
        .par_iter()
        .map(|&x| trajectory_sums(map, v, x, cfg.n_avg).map(|(vn, le)| value(vn, le, cfg.n_avg as f64)))
        .collect::<Result<Vec<_>>>()?;
    for p in 1..=cfg.max_period {
        for o in enumerate_periodic_points(map, p)? {
            let le = 2.0 * orbit_reference_sum(&o);
            vals.push(value(orbit_potential_sum(v, &o), le, p as f64));
        }
    }
    let r_minus = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let r_plus = vals.iter().copied().fold(0.0, f64::max);
    Ok(BandPrediction { k, r_minus, r_plus, n: cfg.n_avg })
}

/// Assign each resonance the band whose `ε`-inflated annulus contains `|z|`.
pub fn band_classify(res: &ResonanceSet, preds: &[BandPrediction], eps: f64) -> Result<ResonanceSet> {
    let mut sorted = preds.to_vec();
    sorted.sort_by(|a, b| b.r_plus.partial_cmp(&a.r_plus).expect("finite radii"));
    for w in sorted.windows(2) {
        if w[1].r_plus + eps >= w[0].r_minus - eps {
            return Err(Error::OverlappingAnnuli);
        }
    }
    let items = res
        .items
        .iter()
        .map(|r| {
            let m = r.z.norm();
            let band = sorted.iter().find(|p| m >= p.r_minus - eps && m <= p.r_plus + eps).map(|p| p.k);
            Resonance { band, ..*r }
        })
        .collect();
    Ok(ResonanceSet { items, ..res.clone() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylReport {
    pub count: usize,
    pub expected: usize,
    pub deviation: i64,
}

pub fn weyl_count(res: &ResonanceSet) -> WeylReport {
    let count = res.band_count(0);
    WeylReport { count, expected: res.n, deviation: count as i64 - res.n as i64 }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationStats {
    pub r_pred: f64,
    pub delta: f64,
    pub fraction_within: f64,
    pub ks_angle: f64,
}

/// Kolmogorov–Smirnov distance of the samples (in `[0,1)`) to the uniform law.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).abs().max((x - i as f64 / n).abs()))
        .fold(0.0, f64::max)
}

/// `exp(⟨D⟩)` with `D = V − V₀` averaged over a `grid × grid` midpoint grid.
pub fn predicted_radius(map: &SymplecticTorusMap, v: &PotentialSpec, grid: usize) -> Result<f64> {
    let vals: Vec<f64> = (0..grid * grid)
        .into_par_iter()
        .map(|idx| {
            let x = TorusPoint::new(((idx / grid) as f64 + 0.5) / grid as f64, ((idx % grid) as f64 + 0.5) / grid as f64);
            let v0 = reference_potential(map, x)?;
            Ok(v.explicit_part(x.as_array()) + (v.reference_count() as f64 - 1.0) * v0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vals.iter().sum::<f64>() / vals.len() as f64).exp())
}

pub fn concentration_stats(band0: &[C64], r_pred: f64, delta: f64) -> ConcentrationStats {
    let within = band0.iter().filter(|z| (z.norm() - r_pred).abs() <= delta).count();
    let angles: Vec<f64> = band0.iter().map(|z| (z.arg() / (2.0 * PI)).rem_euclid(1.0)).collect();
    ConcentrationStats {
        r_pred,
        delta,
        fraction_within: if band0.is_empty() { 0.0 } else { within as f64 / band0.len() as f64 },
        ks_angle: ks_uniform(&angles),
    }
}

/// Companion matrix of the monic polynomial with the given roots (used by tests and the CLI).
pub fn companion_from_roots(roots: &[C64]) -> CMat {
    let mut c = vec![c64(1.0, 0.0)];
    for r in roots {
        let mut next = vec![c64(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        c = next;
    }
    let n = roots.len();
    CMat::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[j + 1]
        } else if i == j + 1 {
            c64(1.0, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_identical_keeps_everything() {
        let s = vec![c64(0.5, 0.1), c64(-0.2, 0.3)];
        let f = resonance_filter(&s, &s, 1e-4);
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|r| r.stability == 1.0));
    }

    #[test]
    fn ks_of_regular_grid_is_small() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!(ks_uniform(&s) <= 0.005 + 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let r = ResonanceSet::new(3, "matrix", "zero", vec![Resonance { z: c64(0.1, 0.2), band: Some(0), stability: 0.5 }]);
        let back = ResonanceSet::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}

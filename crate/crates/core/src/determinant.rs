//! Periodic-orbit engine: Atiyah–Bott flat traces, Gutzwiller sums, the
//! truncated dynamical determinant and its zeros.

use crate::dynamics::{cached_periodic_points, PeriodicOrbit, SymplecticTorusMap};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, CMat};
use crate::prequantum::{orbit_action, orbit_potential_sum, orbit_reference_sum, phase_turns, PotentialSpec};
use crate::spectral::{Resonance, ResonanceSet};
use crate::{c64, cis, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Flat trace and Gutzwiller sum of one period, computed from the same orbit data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSums {
    pub n: usize,
    pub flat: C64,
    pub gutzwiller: C64,
    pub orbit_count: usize,
}

fn sums_over(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, orbits: &[PeriodicOrbit]) -> Result<(C64, C64)> {
    let terms: Vec<(C64, C64)> = orbits
        .par_iter()
        .map(|o| {
            let s = orbit_action(map, o)?.s;
            let phase = cis(2.0 * PI * phase_turns(n_level as u32, s));
            let vn = orbit_potential_sum(v, o);
            let dn = vn - orbit_reference_sum(o);
            Ok((phase * (vn.exp() / o.stability_det), phase * (dn.exp() / o.stability_det.sqrt())))
        })
        .collect::<Result<Vec<_>>>()?;
    // fixed summation order keeps the result independent of the thread count
    Ok(terms.iter().fold((c64(0.0, 0.0), c64(0.0, 0.0)), |acc, t| (acc.0 + t.0, acc.1 + t.1)))
}

pub fn orbit_sums(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, n: usize, cache: Option<&Path>) -> Result<OrbitSums> {
    let orbits = cached_periodic_points(map, n, cache)?;
    let (flat, gutzwiller) = sums_over(map, v, n_level, &orbits)?;
    Ok(OrbitSums { n, flat, gutzwiller, orbit_count: orbits.len() })
}

/// `t_n = Σ_{x=fⁿx} e^{V_n(x)} e^{i2πN S_{n,x}} / |det(1 − Dfⁿ_x)|`
pub fn flat_trace(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, n: usize) -> Result<C64> {
    Ok(orbit_sums(map, v, n_level, n, None)?.flat)
}

/// `Σ_{x=fⁿx} e^{D_n(x)} e^{i2πN S_{n,x}} / √|det(1 − Dfⁿ_x)|`, `D = V − V₀`.
pub fn gutzwiller_sum(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, n: usize) -> Result<C64> {
    Ok(orbit_sums(map, v, n_level, n, None)?.gutzwiller)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatTraceSeries {
    #[serde(rename = "N")]
    pub n_level: usize,
    pub potential: String,
    /// `values[n-1] = t_n`
    pub values: Vec<C64>,
    pub gutzwiller: Vec<C64>,
    pub orbit_counts: Vec<usize>,
}

pub fn trace_series(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, n_max: usize, cache: Option<&Path>) -> Result<FlatTraceSeries> {
    let mut values = Vec::with_capacity(n_max);
    let mut gutz = Vec::with_capacity(n_max);
    let mut counts = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let s = orbit_sums(map, v, n_level, n, cache)?;
        values.push(s.flat);
        gutz.push(s.gutzwiller);
        counts.push(s.orbit_count);
    }
    Ok(FlatTraceSeries { n_level, potential: v.tag(), values, gutzwiller: gutz, orbit_counts: counts })
}

impl FlatTraceSeries {
    /// Series built from explicit traces (synthetic spectra, tests).
    pub fn from_traces(values: Vec<C64>) -> Self {
        let n = values.len();
        FlatTraceSeries { n_level: 0, potential: "synthetic".into(), values, gutzwiller: vec![], orbit_counts: vec![0; n] }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,re_t,im_t,orbit_count\n");
        for (i, t) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{:.17e},{:.17e},{}\n", i + 1, t.re, t.im, self.orbit_counts.get(i).copied().unwrap_or(0)));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicalDeterminant {
    /// `c_0..c_{n_max}` of `d(μ) = exp(−Σ t_n μⁿ/n)`.
    pub coefficients: Vec<C64>,
    /// Modulus below which zeros `z = 1/μ` are not trusted.
    pub reliability_radius: f64,
}

/// Newton-identity recursion `c_m = −(1/m) Σ_{j=1}^{m} t_j c_{m−j}`.
pub fn dyn_determinant(traces: &FlatTraceSeries) -> DynamicalDeterminant {
    let t = &traces.values;
    let n_max = t.len();
    let mut c = vec![c64(1.0, 0.0)];
    for m in 1..=n_max {
        let s: C64 = (1..=m).map(|j| t[j - 1] * c[m - j]).sum();
        c.push(-s / m as f64);
    }
    let deg = effective_degree(&c);
    let last = c[n_max].norm();
    // a tail at round-off level means the series terminated: d is a polynomial and every zero is exact
    let reliability_radius = if n_max == 0 || deg < n_max || last == 0.0 { 0.0 } else { 1.5 * last.powf(1.0 / n_max as f64) };
    DynamicalDeterminant { coefficients: c, reliability_radius }
}

/// Coefficients below this fraction of the largest one count as exact zeros when they close the series.
pub const TAIL_ROUNDOFF: f64 = 1e-13;

fn effective_degree(c: &[C64]) -> usize {
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg].norm() <= TAIL_ROUNDOFF * scale {
        deg -= 1;
    }
    deg
}

/// Roots `z_j` of `zⁿ + c_1 zⁿ⁻¹ + … + c_n`, i.e. `z = 1/μ` for the zeros of `d`.
fn reciprocal_zeros(c: &[C64]) -> Result<Vec<C64>> {
    let deg = effective_degree(c);
    if deg == 0 {
        return Ok(vec![]);
    }
    let comp = CMat::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[j + 1]
        } else if i == j + 1 {
            c64(1.0, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    eigenvalues(&comp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminantZero {
    pub z: C64,
    /// Distance to the nearest zero of the `n_max − 1` truncation.
    pub movement: f64,
    pub stability: f64,
}

/// Scale on which a zero's movement under `n_max → n_max − 1` is measured.
pub const STABILITY_SCALE: f64 = 1e-3;

pub fn determinant_zeros(det: &DynamicalDeterminant, radius: f64) -> Result<Vec<DeterminantZero>> {
    if radius < det.reliability_radius {
        return Err(Error::UnreliableRegion { requested: radius, reliable: det.reliability_radius });
    }
    let c = &det.coefficients;
    let zs = reciprocal_zeros(c)?;
    let prev = if c.len() > 2 { reciprocal_zeros(&c[..c.len() - 1])? } else { vec![] };
    let mut out: Vec<DeterminantZero> = zs
        .into_iter()
        .filter(|z| z.norm() >= radius)
        .map(|z| {
            let movement = prev.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
            let stability = if movement.is_finite() { (1.0 - movement / STABILITY_SCALE).max(0.0) } else { 0.0 };
            DeterminantZero { z, movement, stability }
        })
        .collect();
    out.sort_by(|a, b| b.z.norm().partial_cmp(&a.z.norm()).expect("finite").then(a.z.arg().partial_cmp(&b.z.arg()).expect("finite")));
    Ok(out)
}

/// Resonances from the determinant engine, band-unassigned.
pub fn determinant_resonances(map: &SymplecticTorusMap, v: &PotentialSpec, n_level: usize, n_max: usize, cache: Option<&Path>) -> Result<(ResonanceSet, DynamicalDeterminant, FlatTraceSeries)> {
    let series = trace_series(map, v, n_level, n_max, cache)?;
    let det = dyn_determinant(&series);
    let zeros = determinant_zeros(&det, det.reliability_radius)?;
    let items = zeros.iter().map(|z| Resonance { z: z.z, band: None, stability: z.stability }).collect();
    Ok((ResonanceSet::new(n_level, "determinant", &v.tag(), items), det, series))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceDecayReport {
    pub n_values: Vec<usize>,
    pub errors: Vec<f64>,
    /// Fitted slope of `log e_n`; `None` when every error is below the noise floor.
    pub fitted_rate: Option<f64>,
    pub predicted_log_r1: f64,
    pub noise_floor: f64,
    pub pass: bool,
}

/// Errors `e_n` at or below this fraction of the trace scale are treated as exact.
pub const NOISE_FLOOR: f64 = 1e-11;

/// Compare `Σ_{band 0} λⁿ` with the Gutzwiller sum and fit the decay rate of the error.
pub fn trace_decay_check(band0: &[C64], gutzwiller: &[C64], n_values: &[usize], predicted_r1: f64) -> TraceDecayReport {
    let mut errors = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut floor = 0.0_f64;
    for &n in n_values {
        let tr: C64 = band0.iter().map(|z| z.powi(n as i32)).sum();
        let g = gutzwiller[n - 1];
        let e = (tr - g).norm();
        let scale = band0.iter().map(|z| z.norm().powi(n as i32)).sum::<f64>().max(1.0);
        let nf = NOISE_FLOOR * scale;
        floor = floor.max(nf);
        errors.push(e);
        if e > nf {
            xs.push(n as f64);
            ys.push(e.ln());
        }
    }
    let predicted_log_r1 = predicted_r1.ln();
    let fitted_rate = (xs.len() >= 2).then(|| crate::numerics::fit_slope(&xs, &ys));
    let pass = match fitted_rate {
        Some(r) => r <= predicted_log_r1 + 0.1,
        // no error above the floor: the decay bound holds trivially
        None => true,
    };
    TraceDecayReport { n_values: n_values.to_vec(), errors, fitted_rate, predicted_log_r1, noise_floor: floor, pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case() {
        let d = dyn_determinant(&FlatTraceSeries::from_traces(vec![c64(1.0, 0.0)]));
        assert_eq!(d.coefficients, vec![c64(1.0, 0.0), c64(-1.0, 0.0)]);
        let z = reciprocal_zeros(&d.coefficients).unwrap();
        assert!((z[0] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rank_one_spectrum_truncates() {
        let l = c64(0.3, 0.4);
        let d = dyn_determinant(&FlatTraceSeries::from_traces((1..=8).map(|n| l.powi(n)).collect()));
        assert!((d.coefficients[1] + l).norm() < 1e-15);
        for c in &d.coefficients[2..] {
            assert!(c.norm() < 1e-12);
        }
    }
}

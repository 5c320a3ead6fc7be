//! Quadrature rules, 2-D FFT helpers and small combinatorial utilities.

use crate::{c64, C64};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Integrate `f` over [a, b] with the given Gauss–Legendre order.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let (m, h) = ((a + b) * 0.5, (b - a) * 0.5);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(m + h * xi)).sum::<f64>() * h
}

/// Fourier coefficients `c[kq][kp]` of samples on the midpoint-free uniform grid
/// `x_{ij} = (i/M, j/M)`, normalized so that `f(x) = Σ c_k e^{i2πk·x}`.
pub fn fourier_coefficients(samples: &[C64], m: usize) -> Vec<C64> {
    assert_eq!(samples.len(), m * m);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut data = samples.to_vec();
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![c64(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
    let norm = 1.0 / (m * m) as f64;
    data.iter_mut().for_each(|x| *x *= norm);
    data
}

/// Index into an FFT output for a signed frequency.
pub fn freq_index(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// `ln(n!)` by direct summation (exact enough for the small n used here).
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn sha_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(order);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * order - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-12, "order {order}");
            let even = 2 * order - 2;
            let exact = 2.0 / (even as f64 + 1.0);
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(even as i32)).sum();
            assert!((got - exact).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn fourier_recovers_single_mode() {
        let m = 16;
        let s: Vec<C64> = (0..m * m)
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let arg = 2.0 * PI * (3.0 * i as f64 - 2.0 * j as f64) / m as f64;
                c64(arg.cos(), arg.sin()) * 0.5
            })
            .collect();
        let c = fourier_coefficients(&s, m);
        let hit = c[freq_index(3, m) * m + freq_index(-2, m)];
        assert!((hit - c64(0.5, 0.0)).norm() < 1e-14);
        let total: f64 = c.iter().map(|x| x.norm()).sum();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(7, 0), 1);
        assert_eq!(binomial(3, 5), 0);
    }
}

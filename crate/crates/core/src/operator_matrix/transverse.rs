//! Transverse (band) factor of the operator: a truncated Fock space in the
//! direction normal to the trapped set, built on the eigenbasis of the linear part.
//!
//! Band `k` carries the linear transverse multiplier `λ^{−1/2−k}`. A magnetic
//! translation by `k ∈ Z²` acts on the transverse factor through
//! `W(k) = exp(iθ_k)`, `θ_k = a R_u + b R_s`, where `R_s` raises the band index
//! and `R_u` lowers it; `[R_u, R_s] = i w`, `w = ω(e_u, e_s)`.

use crate::dynamics::{det2, Mat2, SymplecticTorusMap};
use crate::linalg::CMat;
use crate::{c64, cis, C64};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Transverse {
    bands: usize,
    hbar: f64,
    lambda: f64,
    w: f64,
    ei: Mat2,
}

fn factorial_ratio_sqrt(hi: usize, lo: usize) -> f64 {
    // √(hi!/lo!) for hi ≥ lo
    (lo + 1..=hi).map(|k| k as f64).product::<f64>().sqrt()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Transverse {
    pub fn new(map: &SymplecticTorusMap, n_level: usize, bands: usize) -> Self {
        assert!(bands >= 1);
        let (lambda, eu, es) = map.linear_eigen();
        // rows (e_u, e_s)
        let e = [[eu[0], eu[1]], [es[0], es[1]]];
        let det = det2(&e);
        let ei = [[e[1][1] / det, -e[0][1] / det], [-e[1][0] / det, e[0][0] / det]];
        let w = eu[0] * es[1] - eu[1] * es[0];
        Transverse { bands, hbar: 1.0 / (2.0 * PI * n_level as f64), lambda, w, ei }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Linear transverse multipliers `λ^{−1/2−k}`.
    pub fn linear_multipliers(&self) -> Vec<f64> {
        (0..self.bands).map(|k| self.lambda.powf(-0.5 - k as f64)).collect()
    }

    fn coefficients(&self, k: [i64; 2]) -> (f64, f64) {
        let s = 2.0 * PI * self.hbar.sqrt();
        let (kq, kp) = (k[0] as f64, k[1] as f64);
        let a = s * (kp * self.ei[0][0] - kq * self.ei[1][0]);
        let b = s * (kp * self.ei[0][1] - kq * self.ei[1][1]);
        (a, b)
    }

    /// `θ_k` as a matrix.
    pub fn theta(&self, k: [i64; 2]) -> CMat {
        let (a, b) = self.coefficients(k);
        let mut t = CMat::zeros(self.bands, self.bands);
        for m in 1..self.bands {
            let s = (m as f64).sqrt();
            t[(m, m - 1)] += c64(b * s, 0.0);
            t[(m - 1, m)] += c64(0.0, a * self.w * s);
        }
        t
    }

    /// `exp(ib R_s) exp(ia R_u) e^{−iabw/2}` with both factors in closed form.
    pub fn w(&self, k: [i64; 2]) -> CMat {
        let nb = self.bands;
        let (a, b) = self.coefficients(k);
        let cs = c64(0.0, b);
        let cu = -a * self.w;
        let lower = CMat::from_fn(nb, nb, |m, n| {
            if m >= n {
                cs.powi((m - n) as i32) / factorial(m - n) * factorial_ratio_sqrt(m, n)
            } else {
                c64(0.0, 0.0)
            }
        });
        let upper = CMat::from_fn(nb, nb, |m, n| {
            if n >= m {
                c64(cu.powi((n - m) as i32) / factorial(n - m) * factorial_ratio_sqrt(n, m), 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        lower.matmul(&upper).scale(cis(-0.5 * a * b * self.w))
    }

    /// Transverse factor of the generator: `(i/ℏ) W(k) (I − iθ_k)`.
    pub fn generator_factor(&self, k: [i64; 2]) -> CMat {
        let nb = self.bands;
        let wk = self.w(k);
        let th = self.theta(k);
        let m = CMat::identity(nb).sub(&th.scale(c64(0.0, 1.0)));
        wk.matmul(&m).scale(c64(0.0, 1.0 / self.hbar))
    }
}

/// Fourier modes of the shear Hamiltonians: `Ĥ_k` with `H = Σ Ĥ_k e^{i2πk·x}`.
pub fn shear_modes(shear: crate::dynamics::Shear) -> Vec<([i64; 2], C64)> {
    let c = 1.0 / (8.0 * PI * PI);
    match shear {
        crate::dynamics::Shear::P(e) => vec![([1, 0], c64(e * c, 0.0)), ([-1, 0], c64(e * c, 0.0)), ([0, 0], c64(-2.0 * e * c, 0.0))],
        crate::dynamics::Shear::Q(e) => vec![([0, 1], c64(-e * c, 0.0)), ([0, -1], c64(-e * c, 0.0)), ([0, 0], c64(2.0 * e * c, 0.0))],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;

    #[test]
    fn closed_form_w_matches_expm_of_split_factors() {
        let t = Transverse::new(&SymplecticTorusMap::cat(), 4, 7);
        for k in [[1, 0], [0, 1], [2, -1]] {
            let (a, b) = t.coefficients(k);
            let nb = 7;
            let mut rs = CMat::zeros(nb, nb);
            let mut ru = CMat::zeros(nb, nb);
            for m in 1..nb {
                rs[(m, m - 1)] = c64((m as f64).sqrt(), 0.0);
                ru[(m - 1, m)] = c64(0.0, t.w * (m as f64).sqrt());
            }
            let oracle = expm(&rs.scale(c64(0.0, b)))
                .matmul(&expm(&ru.scale(c64(0.0, a))))
                .scale(cis(-0.5 * a * b * t.w));
            assert!(t.w(k).sub(&oracle).norm_max() < 1e-12);
        }
    }

    #[test]
    fn zero_mode_is_identity() {
        let t = Transverse::new(&SymplecticTorusMap::cat(), 3, 5);
        assert!(t.w([0, 0]).sub(&CMat::identity(5)).norm_max() == 0.0);
    }
}

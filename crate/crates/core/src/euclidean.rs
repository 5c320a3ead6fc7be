//! Linear/Euclidean laboratory: wave packets and the Bargmann transform,
//! metaplectic factor, polynomial-block spectra, escape weights, harmonic
//! oscillator and Landau levels, Taylor projectors and the Toeplitz scalar
//! correction.
//!
//! Transforms are implemented for `D = 1` on uniform grids; the closed-form
//! quantities (levels, `d(A)`, block spectra, `c(A)`) take any dimension.

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, CMat, Lu};
use crate::numerics::binomial;
use crate::{c64, cis, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Uniform 1-D grid `x_j = start + j·step`, `j < len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1 {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid1 {
    /// Symmetric grid on `[−half_width, half_width)`.
    pub fn centered(half_width: f64, len: usize) -> Self {
        Grid1 { start: -half_width, step: 2.0 * half_width / len as f64, len }
    }

    pub fn point(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.point(j)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub x: f64,
    pub xi: f64,
    pub hbar: f64,
}

impl WavePacket {
    /// `φ_{x,ξ}(y) = (πℏ)^{−1/4} exp((i/ℏ) ξ(y − x/2) − |y − x|²/(2ℏ))`
    pub fn eval(&self, y: f64) -> C64 {
        let a = (PI * self.hbar).powf(-0.25);
        cis(self.xi * (y - 0.5 * self.x) / self.hbar) * (a * (-(y - self.x).powi(2) / (2.0 * self.hbar)).exp())
    }
}

fn check_resolution(grid: &Grid1, hbar: f64) -> Result<()> {
    let limit = hbar.sqrt() / 4.0;
    if grid.step > limit {
        return Err(Error::GridTooCoarse { spacing: grid.step, limit });
    }
    Ok(())
}

/// `(B_ℏ u)(x, ξ) = ∫ conj(φ_{x,ξ}(y)) u(y) dy` on the phase-space grid
/// `xs × xis` (row index x, column index ξ).
pub fn bargmann_forward(u: &[C64], ygrid: &Grid1, xs: &Grid1, xis: &Grid1, hbar: f64) -> Result<CMat> {
    check_resolution(ygrid, hbar)?;
    assert_eq!(u.len(), ygrid.len);
    let ys = ygrid.points();
    let rows: Vec<Vec<C64>> = (0..xs.len)
        .into_par_iter()
        .map(|i| {
            let x = xs.point(i);
            (0..xis.len)
                .map(|j| {
                    let p = WavePacket { x, xi: xis.point(j), hbar };
                    ys.iter().zip(u).map(|(y, uy)| p.eval(*y).conj() * uy).sum::<C64>() * ygrid.step
                })
                .collect()
        })
        .collect();
    Ok(CMat::from_row_major(xs.len, xis.len, rows.into_iter().flatten().collect()))
}

/// `(B*_ℏ v)(y) = ∫ φ_{x,ξ}(y) v(x,ξ) dx dξ / (2πℏ)`
pub fn bargmann_adjoint(v: &CMat, xs: &Grid1, xis: &Grid1, ygrid: &Grid1, hbar: f64) -> Result<Vec<C64>> {
    check_resolution(ygrid, hbar)?;
    let w = xs.step * xis.step / (2.0 * PI * hbar);
    Ok((0..ygrid.len)
        .into_par_iter()
        .map(|k| {
            let y = ygrid.point(k);
            let mut s = c64(0.0, 0.0);
            for i in 0..xs.len {
                for j in 0..xis.len {
                    s += WavePacket { x: xs.point(i), xi: xis.point(j), hbar }.eval(y) * v[(i, j)];
                }
            }
            s * w
        })
        .collect())
}

/// `L²` norm of a phase-space function with the measure `dx dξ/(2πℏ)`.
pub fn phase_space_norm(v: &CMat, xs: &Grid1, xis: &Grid1, hbar: f64) -> f64 {
    (v.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() * xs.step * xis.step / (2.0 * PI * hbar)).sqrt()
}

pub fn grid_norm(u: &[C64], grid: &Grid1) -> f64 {
    (u.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.step).sqrt()
}

/// `K(z, z') = exp((i/2ℏ) ω(z, z') − |z − z'|²/(4ℏ))` for `z = (x, ξ)`.
pub fn bargmann_projector_kernel(z: [f64; 2], zp: [f64; 2], hbar: f64) -> C64 {
    let om = z[0] * zp[1] - z[1] * zp[0];
    let d2 = (z[0] - zp[0]).powi(2) + (z[1] - zp[1]).powi(2);
    cis(om / (2.0 * hbar)) * (-d2 / (4.0 * hbar)).exp()
}

/// Bargmann projector discretised on the tensor grid `g × g` with the measure
/// `dz/(2πℏ)`; points are ordered row-major `(x_i, ξ_j)`.
pub fn discretized_projector(g: &Grid1, hbar: f64) -> (CMat, Vec<[f64; 2]>) {
    let pts: Vec<[f64; 2]> = (0..g.len).flat_map(|i| (0..g.len).map(move |j| [g.point(i), g.point(j)])).collect();
    let w = g.step * g.step / (2.0 * PI * hbar);
    let n = pts.len();
    let m = CMat::from_fn(n, n, |a, b| bargmann_projector_kernel(pts[a], pts[b], hbar) * w);
    (m, pts)
}

/// `d(A) = det(½(1 + ᵗA A))^{1/2}`
pub fn metaplectic_factor(a: &[Vec<f64>]) -> Result<f64> {
    let d = a.len();
    let am = CMat::from_fn(d, d, |i, j| c64(a[i][j], 0.0));
    if Lu::new(&am).det().norm() < 1e-300 {
        return Err(Error::Singular);
    }
    let g = CMat::identity(d).add(&am.transpose().matmul(&am)).scale(c64(0.5, 0.0));
    Ok(Lu::new(&g).det().re.sqrt())
}

/// Multi-indices `α ∈ N^D` with `|α| = k`, in lexicographic order.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(dim: usize, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            prefix.push(k as u32);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=k).rev() {
            prefix.push(a as u32);
            rec(dim - 1, k - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, k, &mut Vec::new(), &mut out);
    out
}

/// Spectrum of `u ↦ u∘A⁻¹` on homogeneous polynomials of degree `k`: the
/// eigenvalues of the k-th symmetric power of `A⁻¹`, i.e. `∏ μ_j^{α_j}` over the
/// eigenvalues μ of `A⁻¹`.
pub fn la_block_spectrum(a: &[Vec<f64>], k: usize) -> Result<Vec<C64>> {
    let d = a.len();
    let am = CMat::from_fn(d, d, |i, j| c64(a[i][j], 0.0));
    let lu = Lu::new(&am);
    if lu.is_singular() {
        return Err(Error::Singular);
    }
    let inv = lu.inverse();
    let nrm = inv.norm_two();
    if nrm >= 1.0 {
        return Err(Error::NotExpanding(format!("‖A⁻¹‖ = {nrm}")));
    }
    let mu = eigenvalues(&inv)?;
    Ok(multi_indices(d, k)
        .into_iter()
        .map(|alpha| alpha.iter().zip(&mu).fold(c64(1.0, 0.0), |acc, (p, m)| acc * m.powi(*p as i32)))
        .collect())
}

/// Polynomial in D variables with real coefficients, keyed by exponent vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new(dim: usize) -> Self {
        Polynomial { dim, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, alpha: Vec<u32>, c: f64) {
        assert_eq!(alpha.len(), self.dim);
        *self.terms.entry(alpha).or_insert(0.0) += c;
        self.terms.retain(|_, v| *v != 0.0);
    }

    pub fn degree_part(&self, k: usize) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self.terms.iter().filter(|(a, _)| a.iter().sum::<u32>() as usize == k).map(|(a, c)| (a.clone(), *c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.iter().zip(x).map(|(p, xi)| xi.powi(*p as i32)).product::<f64>()).sum()
    }

    /// `p(B x)` for a square matrix B.
    pub fn substitute(&self, b: &[Vec<f64>]) -> Polynomial {
        let mut out = Polynomial::new(self.dim);
        for (alpha, c) in &self.terms {
            // expand ∏_i (Σ_j b_ij x_j)^{α_i}
            let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            acc.insert(vec![0; self.dim], *c);
            for (i, &p) in alpha.iter().enumerate() {
                for _ in 0..p {
                    let mut next = BTreeMap::new();
                    for (e, v) in &acc {
                        for j in 0..self.dim {
                            if b[i][j] != 0.0 {
                                let mut e2 = e.clone();
                                e2[j] += 1;
                                *next.entry(e2).or_insert(0.0) += v * b[i][j];
                            }
                        }
                    }
                    acc = next;
                }
            }
            for (e, v) in acc {
                out.add_term(e, v);
            }
        }
        out
    }
}

/// Taylor projector `T^(k)`: the degree-k homogeneous part at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaylorProjector {
    pub degree: usize,
    pub dim: usize,
}

impl TaylorProjector {
    pub fn rank(&self) -> u64 {
        binomial((self.dim + self.degree - 1) as u64, (self.dim - 1) as u64)
    }

    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        assert_eq!(p.dim, self.dim);
        p.degree_part(self.degree)
    }
}

/// Matrix of `u ↦ u∘A⁻¹` on the monomial basis of degree `k` (columns are images).
pub fn la_block_matrix(a: &[Vec<f64>], k: usize) -> Result<CMat> {
    let d = a.len();
    let am = CMat::from_fn(d, d, |i, j| c64(a[i][j], 0.0));
    let lu = Lu::new(&am);
    if lu.is_singular() {
        return Err(Error::Singular);
    }
    let inv = lu.inverse();
    let b: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| inv[(i, j)].re).collect()).collect();
    let basis = multi_indices(d, k);
    let mut m = CMat::zeros(basis.len(), basis.len());
    for (col, alpha) in basis.iter().enumerate() {
        let mut p = Polynomial::new(d);
        p.add_term(alpha.clone(), 1.0);
        let img = p.substitute(&b);
        for (row, beta) in basis.iter().enumerate() {
            m[(row, col)] = c64(*img.terms.get(beta).unwrap_or(&0.0), 0.0);
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeFunction {
    pub r: f64,
    pub hbar: f64,
}

fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

impl EscapeFunction {
    /// Order function `m ∈ [−r, r]`: `−r` on `|ξ| ≤ |x|/2`, `+r` on `|x| ≤ |ξ|/2`,
    /// quintic smoothstep in the angle in between.
    pub fn order(&self, x: f64, xi: f64) -> f64 {
        let theta = xi.abs().atan2(x.abs());
        let (t1, t2) = (0.5f64.atan(), 2f64.atan());
        -self.r + 2.0 * self.r * smoothstep5((theta - t1) / (t2 - t1))
    }

    /// `W^r(x, ξ) = ⟨|(x, ξ)|⟩^{m}`, with `⟨s⟩ = (1 + s²)^{1/2}`.
    pub fn weight(&self, x: f64, xi: f64) -> f64 {
        let s2 = x * x + xi * xi;
        if s2 == 0.0 {
            return 1.0;
        }
        (1.0 + s2).sqrt().powf(self.order(x, xi))
    }
}

pub fn escape_weight(ef: &EscapeFunction, x: f64, xi: f64) -> f64 {
    ef.weight(x, xi)
}

/// `(D/2 + k, binom(D+k−1, D−1))`
pub fn harmonic_oscillator_levels(dim: usize, k: usize) -> (f64, u64) {
    (dim as f64 / 2.0 + k as f64, binomial((dim + k - 1) as u64, (dim - 1) as u64))
}

/// Lowest eigenvalues of `−(ℏ/2)∂² + x²/(2ℏ)` on `[−L, L)` by Fourier
/// collocation with `n` points (n even).
pub fn harmonic_oscillator_numeric(hbar: f64, half_width: f64, n: usize, count: usize) -> Result<Vec<f64>> {
    assert!(n % 2 == 0);
    let h = 2.0 * PI / n as f64;
    let scale = (PI / half_width).powi(2);
    let g = Grid1::centered(half_width, n);
    let m = CMat::from_fn(n, n, |j, k| {
        // second-derivative collocation matrix on a periodic grid
        let d2 = if j == k {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let d = j as f64 - k as f64;
            let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            -sign / (2.0 * (d * h / 2.0).sin().powi(2))
        };
        let mut v = -0.5 * hbar * d2 * scale;
        if j == k {
            v += g.point(j).powi(2) / (2.0 * hbar);
        }
        c64(v, 0.0)
    });
    let mut ev: Vec<f64> = eigenvalues(&m)?.into_iter().map(|z| z.re).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ev.truncate(count);
    Ok(ev)
}

/// `d + 2k`
pub fn landau_levels(d: usize, k: usize) -> usize {
    d + 2 * k
}

/// Toeplitz scalar correction `(c(A), 𝓜)`:
/// `c(A) = (det Im W / (|det A| det W'))^{1/2}`, `W' = (i/2)(conj(W) − ᵗA⁻¹ W A⁻¹)`,
/// `𝓜 = −½ log|det A| − log c(A)`.
pub fn toeplitz_correction(a: &[Vec<f64>], w: &CMat) -> Result<(f64, f64)> {
    let d = a.len();
    if w.sub(&w.transpose()).norm_max() > 1e-12 {
        return Err(Error::NonPositiveForm);
    }
    let im_w = CMat::from_fn(d, d, |i, j| c64(w[(i, j)].im, 0.0));
    let am = CMat::from_fn(d, d, |i, j| c64(a[i][j], 0.0));
    let lu = Lu::new(&am);
    if lu.is_singular() {
        return Err(Error::Singular);
    }
    let ainv = lu.inverse();
    let wbar = CMat::from_fn(d, d, |i, j| w[(i, j)].conj());
    let wp = wbar.sub(&ainv.transpose().matmul(w).matmul(&ainv)).scale(c64(0.0, 0.5));
    // the Gaussian integrals converge iff Im W ≻ 0 and Re W' ≻ 0
    let re_wp = CMat::from_fn(d, d, |i, j| c64(wp[(i, j)].re, 0.0));
    if !positive_definite(&im_w)? || !positive_definite(&re_wp)? {
        return Err(Error::NonPositiveForm);
    }
    let det_im_w = Lu::new(&im_w).det().re;
    let det_wp = Lu::new(&wp).det();
    let det_a = lu.det().norm();
    let c = (c64(det_im_w, 0.0) / (det_wp * det_a)).sqrt().norm();
    let mm = -0.5 * det_a.ln() - c.ln();
    Ok((c, mm))
}

fn positive_definite(m: &CMat) -> Result<bool> {
    let sym = m.add(&m.adjoint()).scale(c64(0.5, 0.0));
    Ok(eigenvalues(&sym)?.iter().all(|z| z.re > 0.0))
}

/// Affine symplectic map `z ↦ L z + b` of `R²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub l: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl AffineMap {
    pub fn inverse_apply(&self, x: [f64; 2]) -> [f64; 2] {
        let y = [x[0] - self.b[0], x[1] - self.b[1]];
        let l = self.l;
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        [(l[1][1] * y[0] - l[0][1] * y[1]) / det, (-l[1][0] * y[0] + l[0][0] * y[1]) / det]
    }

    /// `𝓐_f(z) = ½ ω(b, L z)`
    pub fn action(&self, z: [f64; 2]) -> f64 {
        let lz = [self.l[0][0] * z[0] + self.l[0][1] * z[1], self.l[1][0] * z[0] + self.l[1][1] * z[1]];
        0.5 * (self.b[0] * lz[1] - self.b[1] * lz[0])
    }
}

/// `(𝓛_f u)(x) = e^{−(i/ℏ)𝓐_f(f⁻¹x)} u(f⁻¹x)` sampled on `g × g` (row-major).
pub fn euclidean_prequantum_apply(f: &AffineMap, hbar: f64, u: impl Fn([f64; 2]) -> C64 + Sync, g: &Grid1) -> Result<Vec<C64>> {
    check_resolution(g, hbar)?;
    Ok((0..g.len * g.len)
        .into_par_iter()
        .map(|idx| {
            let x = [g.point(idx / g.len), g.point(idx % g.len)];
            let y = f.inverse_apply(x);
            cis(-f.action(y) / hbar) * u(y)
        })
        .collect())
}

//! Complex Hessenberg reduction followed by single-shift implicit QR.

use super::{vec_norm, CMat};
use crate::error::{Error, Result};
use crate::{c64, C64};

pub struct Schur {
    /// Upper-triangular factor.
    pub t: CMat,
    /// Unitary factor with `A = Z T Z*`.
    pub z: Option<CMat>,
}

pub struct Eigen {
    pub values: Vec<C64>,
    /// Right eigenvectors as unit-norm columns, in the same order as `values`.
    pub vectors: Option<CMat>,
}

/// Householder reduction to upper Hessenberg form, `A = Q H Q*`.
pub fn hessenberg(a: &CMat, want_q: bool) -> (CMat, Option<CMat>) {
    assert!(a.is_square());
    let n = a.rows();
    let mut h = a.clone();
    let mut q = want_q.then(|| CMat::identity(n));
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = vec_norm(&x);
        if alpha == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { c64(1.0, 0.0) };
        let mut v = x.clone();
        v[0] += phase * alpha;
        let vn = vec_norm(&v);
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vn);
        // H <- (I - 2vv*) H
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * s * 2.0;
            }
        }
        // H <- H (I - 2vv*)
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(j, vj)| h[(i, k + 1 + j)] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                h[(i, k + 1 + j)] -= s * vj.conj() * 2.0;
            }
        }
        if let Some(q) = q.as_mut() {
            for i in 0..n {
                let s: C64 = v.iter().enumerate().map(|(j, vj)| q[(i, k + 1 + j)] * vj).sum();
                for (j, vj) in v.iter().enumerate() {
                    q[(i, k + 1 + j)] -= s * vj.conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = c64(0.0, 0.0);
        }
    }
    (h, q)
}

// Givens rotation G = [[c, s], [-conj(s), c]] with G [x; y] = [r; 0].
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, c64(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition. When `want_z` is false only the diagonal of `t`
/// is meaningful.
pub fn schur(a: &CMat, want_z: bool) -> Result<Schur> {
    let n = a.rows();
    if !a.is_finite() {
        return Err(Error::NonFinite("eigensolver input".into()));
    }
    let (mut h, mut z) = hessenberg(a, want_z);
    if n <= 1 {
        return Ok(Schur { t: h, z });
    }
    let eps = f64::EPSILON;
    let scale = h.norm_max().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let max_total = 100 * n.max(10);
    while hi > 0 {
        // locate the active unreduced block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let tol = if diag > 0.0 { eps * diag } else { eps * scale };
            if sub <= tol.max(scale * 1e-300) {
                h[(lo, lo - 1)] = c64(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_total {
            return Err(Error::NoConvergence(hi));
        }
        let mu = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + c64(0.75 * h[(hi, hi - 1)].norm(), 0.25 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        let (col_lo, col_hi) = if want_z { (0, n) } else { (lo, hi + 1) };
        let mut x = h[(lo, lo)] - mu;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, y);
            let start = if k > lo { k - 1 } else { lo };
            for j in start..col_hi {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * c + s * b;
                h[(k + 1, j)] = -s.conj() * a + b * c;
            }
            let end = (k + 2).min(hi);
            for i in col_lo..=end {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * c + s.conj() * b;
                h[(i, k + 1)] = -s * a + b * c;
            }
            if let Some(z) = z.as_mut() {
                for i in 0..n {
                    let a = z[(i, k)];
                    let b = z[(i, k + 1)];
                    z[(i, k)] = a * c + s.conj() * b;
                    z[(i, k + 1)] = -s * a + b * c;
                }
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = c64(0.0, 0.0);
        }
    }
    Ok(Schur { t: h, z })
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let s = schur(a, false)?;
    Ok((0..a.rows()).map(|i| s.t[(i, i)]).collect())
}

/// Eigenvalues and (optionally) right eigenvectors by back-substitution on the
/// Schur form.
pub fn eigen(a: &CMat, want_vectors: bool) -> Result<Eigen> {
    let s = schur(a, want_vectors)?;
    let n = a.rows();
    let values: Vec<C64> = (0..n).map(|i| s.t[(i, i)]).collect();
    if !want_vectors {
        return Ok(Eigen { values, vectors: None });
    }
    let t = &s.t;
    let z = s.z.as_ref().expect("schur vectors requested");
    let small = f64::EPSILON * t.norm_max().max(f64::MIN_POSITIVE);
    let mut vecs = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut v = vec![c64(0.0, 0.0); n];
        v[k] = c64(1.0, 0.0);
        for j in (0..k).rev() {
            let s: C64 = (j + 1..=k).map(|m| t[(j, m)] * v[m]).sum();
            let mut d = t[(j, j)] - lam;
            if d.norm() < small {
                d = c64(small, 0.0);
            }
            v[j] = -s / d;
        }
        let mut x = z.matvec(&v);
        let nrm = vec_norm(&x);
        x.iter_mut().for_each(|e| *e /= nrm);
        vecs.set_column(k, &x);
    }
    Ok(Eigen { values, vectors: Some(vecs) })
}

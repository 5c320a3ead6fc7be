//! Dense complex linear algebra used by the engines.
//!
//! Matrices are small enough (a few thousand rows at most) that a plain
//! row-major layout with rayon-parallel products is adequate.

mod eig;

pub use eig::{eigen, eigenvalues, hessenberg, schur, Eigen, Schur};

use crate::{c64, C64};
use rayon::prelude::*;
use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c64(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        CMat { rows, cols, data }
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_mut(&mut self, s: C64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CMat { rows: self.rows, cols: self.cols, data }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        let kernel = |(i, row): (usize, &mut [C64])| {
            let a = &self.data[i * self.cols..(i + 1) * self.cols];
            for (k, &aik) in a.iter().enumerate() {
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let b = &other.data[k * m..(k + 1) * m];
                for (o, &bkj) in row.iter_mut().zip(b) {
                    *o += aik * bkj;
                }
            }
        };
        if n * m * self.cols > 1 << 16 {
            out.par_chunks_mut(m.max(1)).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m.max(1)).enumerate().for_each(kernel);
        }
        CMat { rows: n, cols: m, data: out }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut out = Self::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm via power iteration on A*A.
    pub fn norm_two(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let ah = self.adjoint();
        let mut v: Vec<C64> = (0..self.cols).map(|i| c64(1.0 + 0.1 * (i as f64).sin(), 0.0)).collect();
        let mut sigma = 0.0;
        for _ in 0..200 {
            let w = ah.matvec(&self.matvec(&v));
            let nrm = vec_norm(&w);
            if nrm == 0.0 {
                return 0.0;
            }
            let next = nrm.sqrt();
            v = w.into_iter().map(|x| x / nrm).collect();
            if (next - sigma).abs() <= 1e-13 * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                out = out.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &CMat) -> Self {
        assert!(a.is_square());
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let krow = &head[k * n..(k + 1) * n];
            tail.par_chunks_mut(n).for_each(|row| {
                let f = row[k] / pivot;
                row[k] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in k + 1..n {
                        row[j] -= f * krow[j];
                    }
                }
            });
        }
        Lu { lu, perm, sign, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> C64 {
        let n = self.lu.rows();
        (0..n).map(|i| self.lu[(i, i)]).product::<C64>() * self.sign
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.rows();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: C64 = (0..i).map(|j| row[j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: C64 = (i + 1..n).map(|j| row[j] * x[j]).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let cols: Vec<Vec<C64>> = (0..b.cols()).into_par_iter().map(|j| self.solve_vec(&b.column(j))).collect();
        let mut out = CMat::zeros(b.rows(), b.cols());
        for (j, c) in cols.iter().enumerate() {
            out.set_column(j, c);
        }
        out
    }

    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.lu.rows()))
    }
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    let lu = Lu::new(a);
    if lu.is_singular() {
        None
    } else {
        Some(lu.inverse())
    }
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.rows();
    let norm = a.norm_one();
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale(c64(2f64.powi(-s), 0.0));
    let id = CMat::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let lin = |c: [f64; 4], m: [&CMat; 4]| {
        let mut out = CMat::zeros(n, n);
        for (ci, mi) in c.iter().zip(m) {
            out.axpy(c64(*ci, 0.0), mi);
        }
        out
    };
    let u_inner = lin([B[13], B[11], B[9], 0.0], [&a6, &a4, &a2, &id]);
    let u = a.matmul(&a6.matmul(&u_inner).add(&lin([B[7], B[5], B[3], B[1]], [&a6, &a4, &a2, &id])));
    let v_inner = lin([B[12], B[10], B[8], 0.0], [&a6, &a4, &a2, &id]);
    let v = a6.matmul(&v_inner).add(&lin([B[6], B[4], B[2], B[0]], [&a6, &a4, &a2, &id]));
    let p = v.add(&u);
    let q = v.sub(&u);
    let mut r = Lu::new(&q).solve(&p);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| c64(next(), next()))
    }

    #[test]
    fn lu_solves_and_inverts() {
        let a = sample(12, 3);
        let inv = inverse(&a).unwrap();
        let err = a.matmul(&inv).sub(&CMat::identity(12)).norm_max();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = CMat::diag(&[c64(1.0, 0.0), c64(0.0, 2.0), c64(-3.0, 0.5)]);
        let e = expm(&d);
        for i in 0..3 {
            assert!((e[(i, i)] - d[(i, i)].exp()).norm() < 1e-13);
        }
        let mut nil = CMat::zeros(2, 2);
        nil[(0, 1)] = c64(7.0, 0.0);
        let e = expm(&nil);
        assert!((e[(0, 1)] - c64(7.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_group_property() {
        let a = sample(8, 11).scale(c64(4.0, 0.0));
        let e1 = expm(&a);
        let e2 = expm(&a.scale(c64(0.5, 0.0)));
        let err = e1.sub(&e2.matmul(&e2)).norm_max() / e1.norm_max();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn two_norm_of_unitary_is_one() {
        let h = sample(10, 5);
        let herm = h.add(&h.adjoint());
        let u = expm(&herm.scale(c64(0.0, 1.0)));
        assert!((u.norm_two() - 1.0).abs() < 1e-10);
    }
}

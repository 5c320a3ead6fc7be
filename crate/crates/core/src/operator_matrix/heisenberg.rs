//! Finite Heisenberg group acting on the N-dimensional band-0 space `H_N`.
//!
//! In the basis `e_j` (j mod N) the magnetic translations are monomial:
//! `T(1,0) = diag(a_j)`, `a_j = e^{i2π(j + Nκ_p)/N}`, `T(0,1) e_j = b e_{j+1}`,
//! `b = e^{−i2πκ_q}`, and `T(k) = e^{−iπ k_q k_p/N} T(1,0)^{k_q} T(0,1)^{k_p}`,
//! so that `T(k)T(k') = e^{iπω(k,k')/N} T(k+k')`.

use crate::dynamics::{enumerate_periodic_points, IMat2, SymplecticTorusMap};
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, CMat};
use crate::prequantum::{kappa, orbit_action, phase_turns, Kappa};
use crate::{c64, cis, C64};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Heisenberg {
    n: usize,
    kappa: Kappa,
    a: Vec<C64>,
    b: C64,
}

/// `T(k) e_j = phase[j] · e_{target[j]}`
#[derive(Clone, Debug)]
pub struct Monomial {
    pub target: Vec<usize>,
    pub phase: Vec<C64>,
}

impl Monomial {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![c64(0.0, 0.0); v.len()];
        for (j, x) in v.iter().enumerate() {
            out[self.target[j]] += self.phase[j] * x;
        }
        out
    }

    pub fn to_matrix(&self) -> CMat {
        let n = self.target.len();
        let mut m = CMat::zeros(n, n);
        for j in 0..n {
            m[(self.target[j], j)] = self.phase[j];
        }
        m
    }
}

impl Heisenberg {
    pub fn new(n: usize, kappa: Kappa) -> Self {
        assert!(n >= 1);
        let kv = kappa.value();
        let nf = n as f64;
        let a = (0..n).map(|j| cis(2.0 * PI * (j as f64 + nf * kv[1]) / nf)).collect();
        Heisenberg { n, kappa, a, b: cis(-2.0 * PI * kv[0]) }
    }

    pub fn for_map(map: &SymplecticTorusMap, n: usize) -> Result<Self> {
        Ok(Self::new(n, kappa(map)?))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> Kappa {
        self.kappa
    }

    pub fn t(&self, k: [i64; 2]) -> Monomial {
        let n = self.n as i64;
        let pre = cis(-PI * (k[0] as f64) * (k[1] as f64) / self.n as f64) * self.b.powi(k[1] as i32);
        let mut target = Vec::with_capacity(self.n);
        let mut phase = Vec::with_capacity(self.n);
        for j in 0..n {
            let t = (j + k[1]).rem_euclid(n) as usize;
            // B^{kp} picks up b per step and A^{kq} acts on the landing index
            target.push(t);
            phase.push(pre * self.a[t].powi(k[0] as i32));
        }
        Monomial { target, phase }
    }

    pub fn t_matrix(&self, k: [i64; 2]) -> CMat {
        self.t(k).to_matrix()
    }

    /// Metaplectic intertwiner `Û` with `Û T(k) Û⁻¹ = T(k M⁻¹)` (k a row vector),
    /// phase fixed by `Tr Û = Σ_{Fix f₀} e^{i2πNS}/√|det(1−M)|`.
    pub fn metaplectic(&self, m: &IMat2) -> Result<CMat> {
        let tr = m[0][0] + m[1][1];
        if tr <= 2 {
            return Err(Error::NotExpanding(format!("trace {tr} ≤ 2: the linear part must be hyperbolic with positive eigenvalues")));
        }
        let n = self.n;
        // rows of M⁻¹ = [[d, −b], [−c, a]]
        let k1 = [m[1][1], -m[0][1]];
        let k2 = [-m[1][0], m[0][0]];
        let ap = self.t(k1);
        let bp = self.t(k2);
        let a0 = self.a[0];
        // projector onto the a₀-eigenspace of A', applied to the best basis vector
        let mut best: Option<Vec<C64>> = None;
        let mut best_norm = 0.0;
        for j in 0..n {
            let mut e = vec![c64(0.0, 0.0); n];
            e[j] = c64(1.0, 0.0);
            let mut acc = e.clone();
            let mut cur = e;
            for _ in 1..n {
                cur = ap.apply(&cur).into_iter().map(|x| x / a0).collect();
                acc.iter_mut().zip(&cur).for_each(|(s, c)| *s += c);
            }
            let nr = vec_norm(&acc);
            if nr > best_norm + 1e-12 {
                best_norm = nr;
                best = Some(acc);
            }
            if best_norm > 0.5 * (n as f64).sqrt() {
                break;
            }
        }
        let mut f = best.ok_or(Error::Singular)?;
        let nr = vec_norm(&f);
        f.iter_mut().for_each(|x| *x /= nr);
        let mut u = CMat::zeros(n, n);
        for j in 0..n {
            u.set_column(j, &f);
            f = bp.apply(&f).into_iter().map(|x| x / self.b).collect();
        }
        let g1 = gutzwiller_g1(&SymplecticTorusMap::new(*m, 0.0, 0.0, Default::default())?, n)?;
        let tr = u.trace();
        if tr.norm() < 1e-8 || g1.norm() < 1e-8 {
            return Err(Error::Singular);
        }
        let ph = (g1 / g1.norm()) / (tr / tr.norm());
        u.scale_mut(ph);
        Ok(u)
    }
}

/// `Σ_{x = f₀(x)} e^{i2πN S_x} / √|det(1 − M)|` for the linear map.
pub fn gutzwiller_g1(map: &SymplecticTorusMap, n_level: usize) -> Result<C64> {
    let orbits = enumerate_periodic_points(map, 1)?;
    let mut s = c64(0.0, 0.0);
    for o in &orbits {
        let a = orbit_action(map, o)?;
        s += cis(2.0 * PI * phase_turns(n_level as u32, a.s)) / o.stability_det.sqrt();
    }
    Ok(s)
}

//! Symplectic Anosov maps of the 2-torus: the linear cat map composed with two
//! sine shears, their differentials, hyperbolic splitting and periodic points.

use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

const TAU: f64 = 2.0 * PI;

pub type Mat2 = [[f64; 2]; 2];
pub type IMat2 = [[i64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub q: f64,
    pub p: f64,
}

fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub fn new(q: f64, p: f64) -> Self {
        TorusPoint { q: reduce(q), p: reduce(p) }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.q, self.p]
    }

    /// Distance on the torus (sup norm over the nearest lattice translate).
    pub fn torus_dist(&self, other: &TorusPoint) -> f64 {
        let d = |a: f64, b: f64| {
            let x = (a - b).abs();
            x.min(1.0 - x)
        };
        d(self.q, other.q).max(d(self.p, other.p))
    }
}

/// Order in which the two shears are composed after the linear part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShearOrder {
    /// `h = S_q(ε₂) ∘ S_p(ε₁)`: the p-shear acts first.
    #[default]
    PFirst,
    /// `h = S_p(ε₁) ∘ S_q(ε₂)`.
    QFirst,
}

/// One elementary shear. `Shear::P(ε)` moves p by `ε/2π · sin 2πq`,
/// `Shear::Q(ε)` moves q by `ε/2π · sin 2πp`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shear {
    P(f64),
    Q(f64),
}

impl Shear {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Shear::P(e) | Shear::Q(e) => e,
        }
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Shear::P(e) => [x[0], x[1] + e / TAU * (TAU * x[0]).sin()],
            Shear::Q(e) => [x[0] + e / TAU * (TAU * x[1]).sin(), x[1]],
        }
    }

    pub fn inverse(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Shear::P(e) => [x[0], x[1] - e / TAU * (TAU * x[0]).sin()],
            Shear::Q(e) => [x[0] - e / TAU * (TAU * x[1]).sin(), x[1]],
        }
    }

    pub fn jacobian(&self, x: [f64; 2]) -> Mat2 {
        match *self {
            Shear::P(e) => [[1.0, 0.0], [e * (TAU * x[0]).cos(), 1.0]],
            Shear::Q(e) => [[1.0, e * (TAU * x[1]).cos()], [0.0, 1.0]],
        }
    }

    /// Generating Hamiltonian `H` (time-one flow is the shear), normalised by `H(0) = 0`.
    pub fn hamiltonian(&self, x: [f64; 2]) -> f64 {
        match *self {
            Shear::P(e) => e / (TAU * TAU) * ((TAU * x[0]).cos() - 1.0),
            Shear::Q(e) => e / (TAU * TAU) * (1.0 - (TAU * x[1]).cos()),
        }
    }

    /// Closed-form primitive `A(y) = ∫₀^y (η − S*η)` of the shear in the symmetric gauge.
    pub fn action(&self, y: [f64; 2]) -> f64 {
        match *self {
            Shear::P(e) => {
                let v = e / TAU * (TAU * y[0]).sin();
                -(0.5 * y[0] * v + self.hamiltonian(y))
            }
            Shear::Q(e) => {
                let v = e / TAU * (TAU * y[1]).sin();
                -(-0.5 * y[1] * v + self.hamiltonian(y))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticTorusMap {
    pub linear_part: IMat2,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default)]
    pub order: ShearOrder,
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn matvec2(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn imat_mul(a: &IMat2, b: &IMat2) -> IMat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn imat_pow(a: &IMat2, n: u32) -> IMat2 {
    let mut out = [[1, 0], [0, 1]];
    for _ in 0..n {
        out = imat_mul(&out, a);
    }
    out
}

pub fn to_f64(a: &IMat2) -> Mat2 {
    [[a[0][0] as f64, a[0][1] as f64], [a[1][0] as f64, a[1][1] as f64]]
}

impl SymplecticTorusMap {
    pub fn cat() -> Self {
        Self::perturbed_cat(0.0, 0.0)
    }

    pub fn perturbed_cat(eps1: f64, eps2: f64) -> Self {
        SymplecticTorusMap { linear_part: [[2, 1], [1, 1]], eps1, eps2, order: ShearOrder::PFirst }
    }

    pub fn new(linear_part: IMat2, eps1: f64, eps2: f64, order: ShearOrder) -> Result<Self> {
        let m = SymplecticTorusMap { linear_part, eps1, eps2, order };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.linear_part;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det != 1 {
            return Err(Error::InvalidMap(format!("det(linear_part) = {det}, expected 1")));
        }
        if !(self.eps1.is_finite() && self.eps2.is_finite()) {
            return Err(Error::InvalidMap("non-finite shear amplitude".into()));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.eps1 == 0.0 && self.eps2 == 0.0
    }

    pub fn trace(&self) -> i64 {
        self.linear_part[0][0] + self.linear_part[1][1]
    }

    pub fn linear_f64(&self) -> Mat2 {
        to_f64(&self.linear_part)
    }

    pub fn linear_inverse(&self) -> IMat2 {
        let a = self.linear_part;
        [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
    }

    /// Shears in the order they act after the linear part.
    pub fn shears(&self) -> [Shear; 2] {
        match self.order {
            ShearOrder::PFirst => [Shear::P(self.eps1), Shear::Q(self.eps2)],
            ShearOrder::QFirst => [Shear::Q(self.eps2), Shear::P(self.eps1)],
        }
    }

    /// Same map with both amplitudes multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        SymplecticTorusMap { eps1: self.eps1 * s, eps2: self.eps2 * s, ..self.clone() }
    }

    /// Leading eigenvalue λ of the linear part and unit eigenvectors (e_u, e_s).
    pub fn linear_eigen(&self) -> (f64, [f64; 2], [f64; 2]) {
        let m = self.linear_f64();
        let tr = m[0][0] + m[1][1];
        let disc = (tr * tr - 4.0).max(0.0).sqrt();
        let lu = if tr >= 0.0 { 0.5 * (tr + disc) } else { 0.5 * (tr - disc) };
        let ls = 1.0 / lu;
        let vec_for = |l: f64| {
            // (m - l) v = 0
            let v = if (m[0][1]).abs() > 1e-14 {
                [m[0][1], l - m[0][0]]
            } else if (m[1][0]).abs() > 1e-14 {
                [l - m[1][1], m[1][0]]
            } else if (m[0][0] - l).abs() < 1e-12 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
            normalize_sign(v)
        };
        (lu, vec_for(lu), vec_for(ls))
    }

    /// Plane lift `h(Mx)` without reduction.
    pub fn lift(&self, x: [f64; 2]) -> [f64; 2] {
        let mut y = matvec2(&self.linear_f64(), x);
        for s in self.shears() {
            y = s.apply(y);
        }
        y
    }

    pub fn lift_inverse(&self, x: [f64; 2]) -> [f64; 2] {
        let mut y = x;
        for s in self.shears().iter().rev() {
            y = s.inverse(y);
        }
        matvec2(&to_f64(&self.linear_inverse()), y)
    }

    pub fn apply(&self, x: TorusPoint) -> TorusPoint {
        let y = self.lift(x.as_array());
        TorusPoint::new(y[0], y[1])
    }

    pub fn inverse_apply(&self, x: TorusPoint) -> TorusPoint {
        let y = self.lift_inverse(x.as_array());
        TorusPoint::new(y[0], y[1])
    }

    pub fn differential_at(&self, x: [f64; 2]) -> Mat2 {
        let m = self.linear_f64();
        let mut y = matvec2(&m, x);
        let mut j = m;
        for s in self.shears() {
            j = matmul2(&s.jacobian(y), &j);
            y = s.apply(y);
        }
        j
    }

    pub fn differential(&self, x: TorusPoint) -> Mat2 {
        self.differential_at(x.as_array())
    }

    /// Lift and differential of the n-th iterate, without reduction.
    pub fn lift_iterate(&self, x: [f64; 2], n: usize) -> ([f64; 2], Mat2) {
        let mut y = x;
        let mut j = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..n {
            j = matmul2(&self.differential_at(y), &j);
            y = self.lift(y);
        }
        (y, j)
    }

    pub fn map_hash(&self) -> String {
        let s = serde_json::to_string(self).expect("map serializes");
        crate::numerics::sha_hex(s.as_bytes())
    }
}

pub fn normalize_sign(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    let mut u = [v[0] / n, v[1] / n];
    let first = if u[0].abs() > 1e-15 { u[0] } else { u[1] };
    if first < 0.0 {
        u = [-u[0], -u[1]];
    }
    u
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub representative: TorusPoint,
    pub points: Vec<TorusPoint>,
    /// `points[j+1] = lift(points[j]) − deck_vectors[j]` (indices mod n).
    pub deck_vectors: Vec<[i64; 2]>,
    pub monodromy: Mat2,
    pub stability_det: f64,
}

impl PeriodicOrbit {
    /// Build the orbit data from a point known to satisfy `f^n(x) = x` on the torus.
    pub fn from_point(map: &SymplecticTorusMap, x: TorusPoint, n: usize) -> Self {
        let mut points = Vec::with_capacity(n);
        let mut decks = Vec::with_capacity(n);
        let mut cur = x.as_array();
        let mut mono = [[1.0, 0.0], [0.0, 1.0]];
        for j in 0..n {
            points.push(TorusPoint { q: cur[0], p: cur[1] });
            mono = matmul2(&map.differential_at(cur), &mono);
            let z = map.lift(cur);
            let d = if j + 1 == n {
                [(z[0] - x.q).round(), (z[1] - x.p).round()]
            } else {
                [z[0].floor(), z[1].floor()]
            };
            let mut next = [z[0] - d[0], z[1] - d[1]];
            // guard against `floor` landing on a value that rounds to 1.0
            let mut d = d;
            for c in 0..2 {
                if next[c] >= 1.0 {
                    next[c] -= 1.0;
                    d[c] += 1.0;
                }
            }
            decks.push([d[0] as i64, d[1] as i64]);
            cur = next;
        }
        let i_minus = [[1.0 - mono[0][0], -mono[0][1]], [-mono[1][0], 1.0 - mono[1][1]]];
        PeriodicOrbit {
            period: n,
            representative: x,
            points,
            deck_vectors: decks,
            monodromy: mono,
            stability_det: det2(&i_minus).abs(),
        }
    }

    /// Maximum closure defect `|lift(x_j) − d_j − x_{j+1}|`.
    pub fn closure_defect(&self, map: &SymplecticTorusMap) -> f64 {
        let n = self.period;
        (0..n)
            .map(|j| {
                let z = map.lift(self.points[j].as_array());
                let nx = self.points[(j + 1) % n];
                let d = self.deck_vectors[j];
                (z[0] - d[0] as f64 - nx.q).abs().max((z[1] - d[1] as f64 - nx.p).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Key of the orbit as a set: lexicographically smallest point rounded to 1e-10.
    pub fn orbit_key(&self) -> (i64, i64) {
        self.points
            .iter()
            .map(|x| ((x.q * 1e10).round() as i64, (x.p * 1e10).round() as i64))
            .min()
            .expect("non-empty orbit")
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Upper-triangular basis `{(a, c), (0, d)}` of the lattice spanned by `gens`.
fn lattice_basis(mut gens: Vec<(i128, i128)>) -> (i128, i128, i128) {
    loop {
        let mut nz: Vec<usize> = (0..gens.len()).filter(|&i| gens[i].0 != 0).collect();
        if nz.len() <= 1 {
            break;
        }
        nz.sort_by_key(|&i| gens[i].0.abs());
        let piv = gens[nz[0]];
        for &i in &nz[1..] {
            let q = gens[i].0.div_euclid(piv.0);
            gens[i] = (gens[i].0 - q * piv.0, gens[i].1 - q * piv.1);
        }
    }
    let (mut a, mut c) = gens.iter().copied().find(|g| g.0 != 0).expect("full-rank lattice");
    if a < 0 {
        a = -a;
        c = -c;
    }
    let d = gens.iter().filter(|g| g.0 == 0).fold(0, |acc, g| gcd(acc, g.1));
    (a, c.rem_euclid(d), d)
}

/// Fixed points of `x ↦ Mⁿx` on the torus as exact rationals `(u, v)/D`, `D = |det(Mⁿ − I)|`.
pub fn linear_fixed_points(m: &IMat2, n: u32) -> Result<(Vec<(i128, i128)>, i128)> {
    let mn = imat_pow(m, n);
    let a = [[mn[0][0] as i128 - 1, mn[0][1] as i128], [mn[1][0] as i128, mn[1][1] as i128 - 1]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0 {
        return Err(Error::InvalidMap(format!("1 is an eigenvalue of M^{n}")));
    }
    let dd = det.abs();
    // A^{-1} Z² = (1/det) adj(A) Z²; the fixed points are this lattice mod Z².
    let adj = [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]];
    let gens = vec![(adj[0][0], adj[1][0]), (adj[0][1], adj[1][1]), (dd, 0), (0, dd)];
    let gens = gens.into_iter().map(|(x, y)| (x * det.signum(), y * det.signum())).collect();
    let (ba, bc, bd) = lattice_basis(gens);
    let mut pts = Vec::with_capacity(dd as usize);
    for i in 0..dd / ba {
        for j in 0..dd / bd {
            let u = (i * ba).rem_euclid(dd);
            let v = (i * bc + j * bd).rem_euclid(dd);
            pts.push((u, v));
        }
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() as i128 != dd {
        return Err(Error::InvalidMap(format!("lattice enumeration found {} points, expected {dd}", pts.len())));
    }
    Ok((pts, dd))
}

/// Orbit of an exact rational fixed point of the linear map.
fn linear_orbit(map: &SymplecticTorusMap, u: i128, v: i128, den: i128, n: usize) -> PeriodicOrbit {
    let m = map.linear_part;
    let mut points = Vec::with_capacity(n);
    let mut decks = Vec::with_capacity(n);
    let (mut a, mut b) = (u, v);
    for _ in 0..n {
        points.push(TorusPoint { q: a as f64 / den as f64, p: b as f64 / den as f64 });
        let za = m[0][0] as i128 * a + m[0][1] as i128 * b;
        let zb = m[1][0] as i128 * a + m[1][1] as i128 * b;
        decks.push([za.div_euclid(den) as i64, zb.div_euclid(den) as i64]);
        a = za.rem_euclid(den);
        b = zb.rem_euclid(den);
    }
    debug_assert_eq!((a, b), (u, v));
    let mn = to_f64(&imat_pow(&m, n as u32));
    let i_minus = [[1.0 - mn[0][0], -mn[0][1]], [-mn[1][0], 1.0 - mn[1][1]]];
    PeriodicOrbit {
        period: n,
        representative: points[0],
        points,
        deck_vectors: decks,
        monodromy: mn,
        stability_det: det2(&i_minus).abs(),
    }
}

/// Newton solve of `Fⁿ(y) = y + m` in the plane, starting from `y`.
fn newton_periodic(map: &SymplecticTorusMap, mut y: [f64; 2], m: [f64; 2], n: usize) -> Option<[f64; 2]> {
    // lifted coordinates grow like λⁿ, so convergence is judged relative to them
    let tol = |z: [f64; 2]| 1e-12 * (1.0 + z[0].abs().max(z[1].abs()));
    let residual = |y: [f64; 2]| {
        let (z, j) = map.lift_iterate(y, n);
        let r = [z[0] - y[0] - m[0], z[1] - y[1] - m[1]];
        (r, r[0].abs().max(r[1].abs()), z, j)
    };
    let step = |y: [f64; 2], r: [f64; 2], j: Mat2| {
        let a = [[j[0][0] - 1.0, j[0][1]], [j[1][0], j[1][1] - 1.0]];
        let det = det2(&a);
        (det.abs() >= 1e-300).then(|| [y[0] - (a[1][1] * r[0] - a[0][1] * r[1]) / det, y[1] - (-a[1][0] * r[0] + a[0][0] * r[1]) / det])
    };
    for _ in 0..50 {
        let (r, res, z, j) = residual(y);
        if !res.is_finite() {
            return None;
        }
        if res < tol(z) {
            // polish down to the round-off floor while the residual still shrinks
            let mut best = (res, y, r, j);
            for _ in 0..3 {
                let Some(next) = step(best.1, best.2, best.3) else { break };
                let (r2, res2, _, j2) = residual(next);
                if res2.partial_cmp(&best.0) != Some(std::cmp::Ordering::Less) {
                    break;
                }
                best = (res2, next, r2, j2);
            }
            return Some(best.1);
        }
        y = step(y, r, j)?;
    }
    None
}

/// Every fixed point of `fⁿ`, each returned with its orbit data, sorted by
/// representative. Linear maps are solved exactly on the rational lattice,
/// perturbed maps by Newton continuation in ε with step 0.01.
pub fn enumerate_periodic_points(map: &SymplecticTorusMap, n: usize) -> Result<Vec<PeriodicOrbit>> {
    assert!(n >= 1, "period must be positive");
    map.validate()?;
    let (pts, den) = linear_fixed_points(&map.linear_part, n as u32)?;
    let mn = imat_pow(&map.linear_part, n as u32);
    let mut orbits: Vec<PeriodicOrbit> = if map.is_linear() {
        pts.par_iter().map(|&(u, v)| linear_orbit(map, u, v, den, n)).collect()
    } else {
        let emax = map.eps1.abs().max(map.eps2.abs());
        let steps = ((emax / 0.01).ceil() as usize).max(1);
        pts.par_iter()
            .enumerate()
            .map(|(idx, &(u, v))| {
                let mut y = [u as f64 / den as f64, v as f64 / den as f64];
                let mi = [
                    (mn[0][0] as i128 * u + mn[0][1] as i128 * v - u) / den,
                    (mn[1][0] as i128 * u + mn[1][1] as i128 * v - v) / den,
                ];
                let m = [mi[0] as f64, mi[1] as f64];
                for s in 1..=steps {
                    let frac = s as f64 / steps as f64;
                    let sub = map.scaled(frac);
                    y = newton_periodic(&sub, y, m, n)
                        .ok_or(Error::NewtonDivergence { orbit: idx, eps: emax * frac })?;
                }
                Ok(PeriodicOrbit::from_point(map, TorusPoint::new(y[0], y[1]), n))
            })
            .collect::<Result<Vec<_>>>()?
    };
    orbits.sort_by(|a, b| {
        (a.representative.q, a.representative.p)
            .partial_cmp(&(b.representative.q, b.representative.p))
            .expect("finite coordinates")
    });
    if !map.is_linear() {
        for w in orbits.windows(2) {
            if w[0].representative.torus_dist(&w[1].representative) < 1e-9 {
                return Err(Error::NewtonDivergence { orbit: 0, eps: map.eps1.abs().max(map.eps2.abs()) });
            }
        }
    }
    Ok(orbits)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSplitting {
    pub base: TorusPoint,
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
    pub expansion_rate: f64,
}

fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    let c = (a[0] * b[1] - a[1] * b[0]).abs();
    let d = (a[0] * b[0] + a[1] * b[1]).abs();
    c.atan2(d)
}

fn push_forward_direction(map: &SymplecticTorusMap, x: [f64; 2], depth: usize, inverse: bool, seed: [f64; 2]) -> [f64; 2] {
    let mut orbit = Vec::with_capacity(depth + 1);
    let mut y = x;
    orbit.push(y);
    for _ in 0..depth {
        // the differential is periodic; staying on the fundamental domain keeps precision
        let z = if inverse { map.lift(y) } else { map.lift_inverse(y) };
        y = [reduce(z[0]), reduce(z[1])];
        orbit.push(y);
    }
    let mut v = seed;
    for k in (0..depth).rev() {
        let start = orbit[k + 1];
        let j = if inverse {
            // inverse differential at f(start') where start = f(orbit[k]) : D(f^{-1}) at start
            let d = map.differential_at(orbit[k]);
            let det = det2(&d);
            [[d[1][1] / det, -d[0][1] / det], [-d[1][0] / det, d[0][0] / det]]
        } else {
            map.differential_at(start)
        };
        v = matvec2(&j, v);
        let n = v[0].hypot(v[1]);
        v = [v[0] / n, v[1] / n];
    }
    normalize_sign(v)
}

/// Unstable and stable directions at `x` by cocycle power iteration.
pub fn unstable_direction(map: &SymplecticTorusMap, x: TorusPoint, max_iter: usize) -> Result<HyperbolicSplitting> {
    let (_, eu0, es0) = map.linear_eigen();
    let xa = x.as_array();
    let converge = |inverse: bool, seed: [f64; 2]| -> Result<[f64; 2]> {
        let mut prev = push_forward_direction(map, xa, 4, inverse, seed);
        let mut depth = 8;
        while depth <= max_iter.max(8) {
            let cur = push_forward_direction(map, xa, depth, inverse, seed);
            if angle_between(prev, cur) < 1e-12 {
                return Ok(cur);
            }
            prev = cur;
            depth += 4;
        }
        Err(Error::NonConvergence { q: x.q, p: x.p })
    };
    let e_u = converge(false, eu0)?;
    let e_s = converge(true, es0)?;
    let img = matvec2(&map.differential_at(xa), e_u);
    Ok(HyperbolicSplitting { base: x, e_u, e_s, expansion_rate: img[0].hypot(img[1]) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeReport {
    pub grid_size: usize,
    pub aperture: f64,
    pub min_expansion: f64,
    pub max_contraction: f64,
    pub cone_invariant: bool,
    pub pass: bool,
}

/// Cone test relative to the linear eigenbasis: the unstable cone
/// `{α e_u + β e_s : |β| ≤ a|α|}` must map strictly inside itself with the
/// `e_u`-coefficient growing by at least `min_expansion > 1`.
pub fn verify_anosov_cones(map: &SymplecticTorusMap, grid_size: usize, aperture: f64) -> ConeReport {
    assert!(grid_size >= 16, "grid_size must be at least 16");
    let (_, eu, es) = map.linear_eigen();
    let basis = [[eu[0], es[0]], [eu[1], es[1]]];
    let bdet = det2(&basis);
    let coords = |v: [f64; 2]| [(basis[1][1] * v[0] - basis[0][1] * v[1]) / bdet, (-basis[1][0] * v[0] + basis[0][0] * v[1]) / bdet];
    let dirs: Vec<f64> = (0..=8).map(|i| -aperture + 2.0 * aperture * i as f64 / 8.0).collect();
    let cells: Vec<(usize, usize)> = (0..grid_size).flat_map(|i| (0..grid_size).map(move |j| (i, j))).collect();
    let per_cell: Vec<(f64, f64, bool)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let x = [(i as f64 + 0.5) / grid_size as f64, (j as f64 + 0.5) / grid_size as f64];
            let d = map.differential_at(x);
            let det = det2(&d);
            let dinv = [[d[1][1] / det, -d[0][1] / det], [-d[1][0] / det, d[0][0] / det]];
            let mut min_exp = f64::INFINITY;
            let mut max_con: f64 = 0.0;
            let mut inside = true;
            for &b in &dirs {
                let v = [eu[0] + b * es[0], eu[1] + b * es[1]];
                let c = coords(matvec2(&d, v));
                if c[1].abs() >= aperture * c[0].abs() {
                    inside = false;
                }
                min_exp = min_exp.min(c[0].abs());
                // stable cone under the inverse
                let w = [es[0] + b * eu[0], es[1] + b * eu[1]];
                let cw = coords(matvec2(&dinv, w));
                if cw[0].abs() >= aperture * cw[1].abs() {
                    inside = false;
                }
                max_con = max_con.max(1.0 / cw[1].abs());
            }
            (min_exp, max_con, inside)
        })
        .collect();
    let min_expansion = per_cell.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let max_contraction = per_cell.iter().map(|c| c.1).fold(0.0, f64::max);
    let cone_invariant = per_cell.iter().all(|c| c.2);
    ConeReport {
        grid_size,
        aperture,
        min_expansion,
        max_contraction,
        cone_invariant,
        pass: cone_invariant && min_expansion > 1.0 && max_contraction < 1.0,
    }
}

pub fn birkhoff_sum(map: &SymplecticTorusMap, g: impl Fn(TorusPoint) -> f64, x: TorusPoint, n: usize) -> f64 {
    let mut y = x;
    let mut s = 0.0;
    for _ in 0..n {
        y = map.apply(y);
        s += g(y);
    }
    s
}

/// One line of the periodic-orbit cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub map_hash: String,
    pub n: usize,
    pub points: Vec<[f64; 2]>,
    pub deck_vectors: Vec<[i64; 2]>,
    pub monodromy: Mat2,
    pub stability_det: f64,
    #[serde(rename = "S_mod1", skip_serializing_if = "Option::is_none", default)]
    pub s_mod1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gauge: Option<String>,
}

impl OrbitRecord {
    pub fn new(map: &SymplecticTorusMap, orbit: &PeriodicOrbit) -> Self {
        OrbitRecord {
            map_hash: map.map_hash(),
            n: orbit.period,
            points: orbit.points.iter().map(|p| p.as_array()).collect(),
            deck_vectors: orbit.deck_vectors.clone(),
            monodromy: orbit.monodromy,
            stability_det: orbit.stability_det,
            s_mod1: None,
            gauge: None,
        }
    }

    pub fn to_orbit(&self) -> PeriodicOrbit {
        let points: Vec<TorusPoint> = self.points.iter().map(|p| TorusPoint { q: p[0], p: p[1] }).collect();
        PeriodicOrbit {
            period: self.n,
            representative: points[0],
            points,
            deck_vectors: self.deck_vectors.clone(),
            monodromy: self.monodromy,
            stability_det: self.stability_det,
        }
    }
}

/// Written to a sibling temporary file and renamed into place, so concurrent
/// readers never see a partial cache.
pub fn write_orbit_cache(path: &Path, records: &[OrbitRecord]) -> Result<()> {
    static SEQ: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
    let seq = SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp{}-{seq}", std::process::id()));
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        for r in records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_orbit_cache(path: &Path) -> Result<Vec<OrbitRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Orbits for `(map, n)`, loaded from `dir` when a cache file exists and written otherwise.
pub fn cached_periodic_points(map: &SymplecticTorusMap, n: usize, dir: Option<&Path>) -> Result<Vec<PeriodicOrbit>> {
    let Some(dir) = dir else {
        return enumerate_periodic_points(map, n);
    };
    let path = dir.join(format!("orbits_{}_{n}.jsonl", map.map_hash()));
    if path.exists() {
        let recs = read_orbit_cache(&path)?;
        if recs.iter().all(|r| r.map_hash == map.map_hash() && r.n == n) {
            return Ok(recs.iter().map(OrbitRecord::to_orbit).collect());
        }
    }
    let orbits = enumerate_periodic_points(map, n)?;
    std::fs::create_dir_all(dir)?;
    let recs: Vec<OrbitRecord> = orbits.iter().map(|o| OrbitRecord::new(map, o)).collect();
    write_orbit_cache(&path, &recs)?;
    Ok(orbits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_handles_negative_and_boundary() {
        let x = TorusPoint::new(-0.25, 1.0);
        assert_eq!(x.q, 0.75);
        assert_eq!(x.p, 0.0);
        let y = TorusPoint::new(-1e-18, 0.5);
        assert!(y.q < 1.0 && y.q >= 0.0);
    }

    #[test]
    fn lattice_basis_index() {
        let (a, c, d) = lattice_basis(vec![(2, 1), (1, 3), (5, 0), (0, 5)]);
        assert_eq!(a * d, 5);
        assert!(c < d);
    }

    #[test]
    fn lift_inverse_roundtrip() {
        let m = SymplecticTorusMap::perturbed_cat(0.3, -0.2);
        for i in 0..20 {
            let x = [0.05 * i as f64, 0.37 * i as f64 % 1.0];
            let back = m.lift_inverse(m.lift(x));
            assert!((back[0] - x[0]).abs() < 1e-13 && (back[1] - x[1]).abs() < 1e-13);
        }
    }
}

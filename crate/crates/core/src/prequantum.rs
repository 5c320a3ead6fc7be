//! Prequantum line-bundle data on the torus: connection, lift actions, the
//! existence conditions for an equivariant lift, and periodic-orbit actions.
//!
//! Sections of the N-th bundle are functions on the plane with
//! `u(x + n) = χ_n(x) u(x)`, where
//! `χ_n(x) = exp(i2πN [½(ω(n,x) + n_q n_p) + κ·n])` in the symmetric gauge.
//! The shift κ is forced by compatibility with the linear part of the map.

use crate::dynamics::{PeriodicOrbit, Shear, SymplecticTorusMap, TorusPoint};
use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;
use crate::{cis, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `ω(a, b) = a_q b_p − a_p b_q`
#[inline]
pub fn omega(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `η = ½(q dp − p dq)`
    #[default]
    Symmetric,
    /// `η' = q dp = η + d(qp/2)`
    QDp,
}

impl Gauge {
    /// Evaluate the connection one-form at `y` on the vector `v`.
    pub fn eta(&self, y: [f64; 2], v: [f64; 2]) -> f64 {
        match self {
            Gauge::Symmetric => 0.5 * (y[0] * v[1] - y[1] * v[0]),
            Gauge::QDp => y[0] * v[1],
        }
    }

    /// Gauge potential φ with `η_gauge = η_sym + dφ`.
    pub fn potential(&self, y: [f64; 2]) -> f64 {
        match self {
            Gauge::Symmetric => 0.0,
            Gauge::QDp => 0.5 * y[0] * y[1],
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Gauge::Symmetric => "symmetric",
            Gauge::QDp => "q_dp",
        }
    }
}

/// Rational Floquet shift `κ = (num_q, num_p) / den`, reduced to `[0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kappa {
    pub num: [i64; 2],
    pub den: i64,
}

impl Kappa {
    pub fn value(&self) -> [f64; 2] {
        [self.num[0] as f64 / self.den as f64, self.num[1] as f64 / self.den as f64]
    }

    pub fn dot(&self, n: [i64; 2]) -> f64 {
        let v = self.value();
        v[0] * n[0] as f64 + v[1] * n[1] as f64
    }
}

/// Solve `ᵗ(M − I) κ ≡ ½(ac, bd) mod 1` for `M = [[a, b], [c, d]]`.
pub fn kappa(map: &SymplecticTorusMap) -> Result<Kappa> {
    let m = map.linear_part;
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    // rhs = (r_q, r_p)/2 with r ∈ {0,1}
    let r = [(a * c).rem_euclid(2), (b * d).rem_euclid(2)];
    // ᵗ(M − I) = [[a−1, c], [b, d−1]]
    let t = [[a - 1, c], [b, d - 1]];
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    if det == 0 {
        return Err(Error::InvalidMap("1 is an eigenvalue of the linear part".into()));
    }
    // κ = adj(t) r / (2 det)
    let nq = t[1][1] * r[0] - t[0][1] * r[1];
    let np = -t[1][0] * r[0] + t[0][0] * r[1];
    let mut den = 2 * det;
    let (mut nq, mut np) = (nq, np);
    if den < 0 {
        den = -den;
        nq = -nq;
        np = -np;
    }
    let g = gcd(gcd(nq, np), den).max(1);
    let (nq, np, den) = (nq / g, np / g, den / g);
    Ok(Kappa { num: [nq.rem_euclid(den), np.rem_euclid(den)], den })
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Phase exponent (in turns, per unit N) of the quasi-periodicity multiplier
/// `χ_n(x)` in the given gauge.
pub fn multiplier_phase(gauge: Gauge, kap: &Kappa, n: [i64; 2], x: [f64; 2]) -> f64 {
    let nf = [n[0] as f64, n[1] as f64];
    let sym = 0.5 * (omega(nf, x) + nf[0] * nf[1]) + kap.dot(n);
    sym + gauge.potential([x[0] + nf[0], x[1] + nf[1]]) - gauge.potential(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// Symplectic volume of the torus (must be an integer, here 1).
    pub symplectic_volume: f64,
    pub integrality: bool,
    pub det_m_minus_i: i64,
    pub no_unit_eigenvalue: bool,
    pub pass: bool,
}

pub fn check_lift_conditions(map: &SymplecticTorusMap) -> LiftReport {
    // ∫ dq∧dp over the fundamental domain spanned by the lattice basis
    let vol = omega([1.0, 0.0], [0.0, 1.0]);
    let m = map.linear_part;
    let det = (m[0][0] - 1) * (m[1][1] - 1) - m[0][1] * m[1][0];
    let integrality = (vol - vol.round()).abs() < 1e-15 && vol.round() == 1.0;
    LiftReport {
        symplectic_volume: vol,
        integrality,
        det_m_minus_i: det,
        no_unit_eigenvalue: det != 0,
        pass: integrality && det != 0,
    }
}

/// Action of the translation `x ↦ x + b`: `½ ω(b, x)`.
pub fn affine_action(b: [f64; 2], x: [f64; 2]) -> f64 {
    0.5 * omega(b, x)
}

fn path_integrand(map: &SymplecticTorusMap, gauge: Gauge, x: [f64; 2], v: [f64; 2]) -> f64 {
    let fx = map.lift(x);
    let dv = crate::dynamics::matvec2(&map.differential_at(x), v);
    gauge.eta(fx, dv) - gauge.eta(x, v)
}

fn segment_rule(map: &SymplecticTorusMap, gauge: Gauge, x0: [f64; 2], x1: [f64; 2], nodes: &[f64], weights: &[f64]) -> f64 {
    let v = [x1[0] - x0[0], x1[1] - x0[1]];
    nodes
        .iter()
        .zip(weights)
        .map(|(t, w)| {
            let s = 0.5 * (t + 1.0);
            let x = [x0[0] + s * v[0], x0[1] + s * v[1]];
            0.5 * w * path_integrand(map, gauge, x, v)
        })
        .sum()
}

/// `∫_γ (f*η − η)` along the straight segment `x₀ → x₁` by Gauss–Legendre
/// quadrature; the order is doubled until two successive values agree to 1e-9.
pub fn path_action_in_gauge(map: &SymplecticTorusMap, gauge: Gauge, x0: [f64; 2], x1: [f64; 2], order: usize) -> Result<f64> {
    if map.is_linear() && gauge == Gauge::Symmetric {
        // f*η = η for linear symplectic maps
        return Ok(0.0);
    }
    let mut order = order.max(2);
    let (n, w) = gauss_legendre(order);
    let mut prev = segment_rule(map, gauge, x0, x1, &n, &w);
    while order <= 512 {
        order *= 2;
        let (n, w) = gauss_legendre(order);
        let cur = segment_rule(map, gauge, x0, x1, &n, &w);
        if (cur - prev).abs() <= 1e-9 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged(prev))
}

pub fn path_action(map: &SymplecticTorusMap, x0: [f64; 2], x1: [f64; 2], order: usize) -> Result<f64> {
    path_action_in_gauge(map, Gauge::Symmetric, x0, x1, order)
}

/// Closed-form lift action `A(y) = ∫₀^y (η − f*η)` in the symmetric gauge:
/// the linear part contributes nothing, each shear contributes its own primitive
/// evaluated at the point where it acts.
pub fn lift_action_exact(map: &SymplecticTorusMap, y: [f64; 2]) -> f64 {
    let mut z = crate::dynamics::matvec2(&map.linear_f64(), y);
    let mut a = 0.0;
    for s in map.shears() {
        if s.amplitude() != 0.0 {
            a += s.action(z);
        }
        z = s.apply(z);
    }
    a
}

/// Action of a single shear, exposed for tests and the operator engine.
pub fn shear_action(s: Shear, y: [f64; 2]) -> f64 {
    s.action(y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitAction {
    pub representative: TorusPoint,
    pub period: usize,
    /// `S mod 1`, in `[0, 1)`.
    pub s: f64,
    pub gauge: Gauge,
    pub quadrature_order: usize,
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 16;

/// Per-step phase increments composed around the lifted orbit:
/// `S = Σ_j [∫₀^{x_j}(f*η − η) − Φ_{d_j}(x_{j+1})] mod 1`
/// with `Φ_n` the multiplier phase. Zero on the origin's orbit.
pub fn orbit_action_in_gauge(map: &SymplecticTorusMap, orbit: &PeriodicOrbit, gauge: Gauge, order: usize) -> Result<OrbitAction> {
    let kap = kappa(map)?;
    let n = orbit.period;
    let mut s = 0.0;
    for j in 0..n {
        let x = orbit.points[j].as_array();
        let next = orbit.points[(j + 1) % n].as_array();
        let d = orbit.deck_vectors[j];
        s += path_action_in_gauge(map, gauge, [0.0, 0.0], x, order)?;
        s -= multiplier_phase(gauge, &kap, d, next);
    }
    Ok(OrbitAction { representative: orbit.representative, period: n, s: frac(s), gauge, quadrature_order: order })
}

pub fn orbit_action(map: &SymplecticTorusMap, orbit: &PeriodicOrbit) -> Result<OrbitAction> {
    orbit_action_in_gauge(map, orbit, Gauge::Symmetric, DEFAULT_QUADRATURE_ORDER)
}

pub fn orbit_actions(map: &SymplecticTorusMap, orbits: &[PeriodicOrbit], gauge: Gauge) -> Result<Vec<OrbitAction>> {
    orbits.par_iter().map(|o| orbit_action_in_gauge(map, o, gauge, DEFAULT_QUADRATURE_ORDER)).collect()
}

pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `N S mod 1` evaluated without losing the fractional part of `S`.
pub fn phase_turns(n_level: u32, s: f64) -> f64 {
    frac(n_level as f64 * s)
}

/// `exp(−i2π · signed area)` of a closed plane polygon.
pub fn holonomy_oracle(polygon: &[[f64; 2]]) -> C64 {
    let k = polygon.len();
    if k < 3 {
        return cis(0.0);
    }
    let area: f64 = (0..k).map(|i| omega(polygon[i], polygon[(i + 1) % k])).sum::<f64>() * 0.5;
    cis(-2.0 * PI * area)
}

/// A real trigonometric term `amp · cos(2π k·x)` or `amp · sin(2π k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    pub amp: f64,
    pub k: [i64; 2],
    pub sine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum PotentialSpec {
    Zero,
    Constant(f64),
    Field(Vec<FieldTerm>),
    /// `V₀ = ½ log ‖Df|E_u‖`
    Reference,
    Sum(Vec<PotentialSpec>),
}

impl PotentialSpec {
    /// Parse `zero`, `const:c`, `v0`, `field:<terms>` or a comma-separated sum,
    /// where `<terms>` is `a*cos[kq,kp]` / `a*sin[kq,kp]` joined by `+`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts = split_top(s.trim());
        if parts.len() > 1 {
            return parts.iter().map(|p| Self::parse(p)).collect::<std::result::Result<Vec<_>, _>>().map(PotentialSpec::Sum);
        }
        let s = s.trim();
        if s == "zero" {
            Ok(PotentialSpec::Zero)
        } else if s == "v0" || s == "reference" {
            Ok(PotentialSpec::Reference)
        } else if let Some(c) = s.strip_prefix("const:") {
            c.trim().parse::<f64>().map(PotentialSpec::Constant).map_err(|e| format!("bad constant {c:?}: {e}"))
        } else if let Some(f) = s.strip_prefix("field:") {
            let mut terms = Vec::new();
            for t in f.split('+').map(str::trim).filter(|t| !t.is_empty()) {
                terms.push(parse_term(t)?);
            }
            if terms.is_empty() {
                return Err("empty field".into());
            }
            Ok(PotentialSpec::Field(terms))
        } else {
            Err(format!("unknown potential {s:?}"))
        }
    }

    pub fn tag(&self) -> String {
        match self {
            PotentialSpec::Zero => "zero".into(),
            PotentialSpec::Constant(c) => format!("const:{c}"),
            PotentialSpec::Reference => "v0".into(),
            PotentialSpec::Field(t) => {
                let s: Vec<String> = t
                    .iter()
                    .map(|t| format!("{}*{}[{},{}]", t.amp, if t.sine { "sin" } else { "cos" }, t.k[0], t.k[1]))
                    .collect();
                format!("field:{}", s.join("+"))
            }
            PotentialSpec::Sum(v) => v.iter().map(|p| p.tag()).collect::<Vec<_>>().join(","),
        }
    }

    pub fn uses_reference(&self) -> bool {
        match self {
            PotentialSpec::Reference => true,
            PotentialSpec::Sum(v) => v.iter().any(|p| p.uses_reference()),
            _ => false,
        }
    }

    /// Constant value if the potential is spatially constant and does not involve V₀.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::Constant(c) => Some(*c),
            PotentialSpec::Sum(v) => v.iter().map(|p| p.as_constant()).sum(),
            _ => None,
        }
    }

    /// Smooth part (everything except V₀), evaluated at `x`.
    pub fn explicit_part(&self, x: [f64; 2]) -> f64 {
        match self {
            PotentialSpec::Zero | PotentialSpec::Reference => 0.0,
            PotentialSpec::Constant(c) => *c,
            PotentialSpec::Field(terms) => terms
                .iter()
                .map(|t| {
                    let a = 2.0 * PI * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
                    t.amp * if t.sine { a.sin() } else { a.cos() }
                })
                .sum(),
            PotentialSpec::Sum(v) => v.iter().map(|p| p.explicit_part(x)).sum(),
        }
    }

    /// Multiplicity of V₀ in the spec (0 or more).
    pub fn reference_count(&self) -> usize {
        match self {
            PotentialSpec::Reference => 1,
            PotentialSpec::Sum(v) => v.iter().map(|p| p.reference_count()).sum(),
            _ => 0,
        }
    }
}

fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_term(t: &str) -> std::result::Result<FieldTerm, String> {
    let (amp, rest) = t.split_once('*').ok_or_else(|| format!("term {t:?}: expected a*cos[kq,kp]"))?;
    let amp: f64 = amp.trim().parse().map_err(|e| format!("term {t:?}: {e}"))?;
    let rest = rest.trim();
    let (sine, inner) = if let Some(r) = rest.strip_prefix("cos[") {
        (false, r)
    } else if let Some(r) = rest.strip_prefix("sin[") {
        (true, r)
    } else {
        return Err(format!("term {t:?}: expected cos[..] or sin[..]"));
    };
    let inner = inner.strip_suffix(']').ok_or_else(|| format!("term {t:?}: missing ]"))?;
    let (a, b) = inner.split_once(',').ok_or_else(|| format!("term {t:?}: expected two wave numbers"))?;
    let kq = a.trim().parse().map_err(|e| format!("term {t:?}: {e}"))?;
    let kp = b.trim().parse().map_err(|e| format!("term {t:?}: {e}"))?;
    Ok(FieldTerm { amp, k: [kq, kp], sine })
}

pub const SPLITTING_DEPTH: usize = 80;

/// `V₀(x) = ½ log ‖Df_x e_u(x)‖`.
pub fn reference_potential(map: &SymplecticTorusMap, x: TorusPoint) -> Result<f64> {
    if map.is_linear() {
        return Ok(0.5 * map.linear_eigen().0.abs().ln());
    }
    let sp = crate::dynamics::unstable_direction(map, x, SPLITTING_DEPTH)?;
    Ok(0.5 * sp.expansion_rate.ln())
}

pub fn evaluate_potential(spec: &PotentialSpec, map: &SymplecticTorusMap, x: TorusPoint) -> Result<f64> {
    let mut v = spec.explicit_part(x.as_array());
    let r = spec.reference_count();
    if r > 0 {
        v += r as f64 * reference_potential(map, x)?;
    }
    Ok(v)
}

/// Birkhoff sum of the potential over a periodic orbit. The V₀ part telescopes to
/// `½ log |Λ_u|` with `Λ_u` the unstable eigenvalue of the monodromy.
pub fn orbit_potential_sum(spec: &PotentialSpec, orbit: &PeriodicOrbit) -> f64 {
    let explicit: f64 = orbit.points.iter().map(|x| spec.explicit_part(x.as_array())).sum();
    let r = spec.reference_count();
    if r == 0 {
        return explicit;
    }
    explicit + r as f64 * 0.5 * unstable_multiplier(&orbit.monodromy).ln()
}

/// `|Λ_u|` for a hyperbolic 2×2 matrix of determinant one.
pub fn unstable_multiplier(m: &crate::dynamics::Mat2) -> f64 {
    let tr = (m[0][0] + m[1][1]).abs();
    0.5 * (tr + (tr * tr - 4.0).max(0.0).sqrt())
}

/// Birkhoff sum of `V₀` along a periodic orbit (`½ log |Λ_u|`).
pub fn orbit_reference_sum(orbit: &PeriodicOrbit) -> f64 {
    0.5 * unstable_multiplier(&orbit.monodromy).ln()
}

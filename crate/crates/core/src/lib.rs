//! Prequantum transfer operators for symplectic Anosov maps of the 2-torus and
//! their Ruelle–Pollicott resonances, computed by a Galerkin matrix engine and a
//! periodic-orbit (dynamical determinant) engine.

pub mod determinant;
pub mod dynamics;
pub mod error;
pub mod euclidean;
pub mod linalg;
pub mod numerics;
pub mod operator_matrix;
pub mod prequantum;
pub mod quantization;
pub mod spectral;

pub type C64 = num_complex::Complex64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{iθ}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

pub use dynamics::{HyperbolicSplitting, PeriodicOrbit, SymplecticTorusMap, TorusPoint};
pub use error::{Error, Result};
pub use linalg::CMat;
pub use prequantum::{Gauge, OrbitAction, PotentialSpec};
pub use spectral::{BandPrediction, ResonanceSet};

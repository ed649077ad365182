//! Conformal coordinates on the unit ball and the Möbius bridge charts.
//!
//! The ball is parametrized by `(z, x3)` with `z` in the closed unit disk:
//! `𝒳(z, x3) = A (z, B sinh x3)` where `B = (1+|z|²)/2` and
//! `A = 1/(1 + B (cosh x3 - 1))`. Each level set `x3 = c` is a spherical cap
//! meeting the unit sphere orthogonally. In these coordinates the Euclidean
//! metric reads `A²(|dz|² + B² dx3²)`.
//!
//! Near the `m`-th boundary root of unity the chart `Λ_m(ζ, ξ3) = (λ_m(ζ), 2ξ3)`
//! with `λ_m(ζ) = e^{2πim/n}(1+ζ)/(1−ζ)` maps the closed left half plane onto the
//! closed disk; the metric becomes `a²(|dζ|² + b² dξ3²)`.

use crate::error::{FbmsError, Result};
use crate::jet::{CJet, Jet};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Rounding slack accepted on chart domain boundaries.
pub const CHART_SLACK: f64 = 1e-12;

/// A point of the `(z, x3)` chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalCoords {
    pub z: Complex64,
    pub x3: f64,
}

/// Metric factors `A` and `B` at a chart point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricFactors {
    pub a: f64,
    pub b: f64,
}

/// Identifies the Möbius chart around the `m`-th bridge of an `n`-fold construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BridgeChart {
    pub m: usize,
    pub n: usize,
}

impl BridgeChart {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if n < 3 || m == 0 || m > n {
            return Err(FbmsError::InvalidParameter(format!("bridge index m={m} for n={n}")));
        }
        Ok(BridgeChart { m, n })
    }

    /// The root of unity `z_m = e^{2πim/n}`.
    pub fn root(&self) -> Complex64 {
        root_of_unity(self.m, self.n)
    }
}

/// `e^{2πim/n}`.
pub fn root_of_unity(m: usize, n: usize) -> Complex64 {
    let k = m % n;
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

/// `B(z) = (1+|z|²)/2`.
pub fn eval_b(z: Complex64) -> f64 {
    0.5 * (1.0 + z.norm_sqr())
}

/// `cosh x - 1` without cancellation.
#[inline]
pub fn cosh_m1(x: f64) -> f64 {
    let s = (0.5 * x).sinh();
    2.0 * s * s
}

/// `A(z, x3) = 1/(1 + B(z)(cosh x3 - 1))`.
pub fn eval_a(z: Complex64, x3: f64) -> f64 {
    1.0 / (1.0 + eval_b(z) * cosh_m1(x3))
}

pub fn metric_factors(z: Complex64, x3: f64) -> MetricFactors {
    MetricFactors { a: eval_a(z, x3), b: eval_b(z) }
}

/// `𝒳(z, x3)`; rejects `|z| > 1`.
pub fn chart_calx(z: Complex64, x3: f64) -> Result<[f64; 3]> {
    if z.norm() > 1.0 + CHART_SLACK || !x3.is_finite() {
        return Err(FbmsError::OutOfChart(format!("z={z}, x3={x3}")));
    }
    Ok(calx_unchecked(z, x3))
}

#[inline]
pub(crate) fn calx_unchecked(z: Complex64, x3: f64) -> [f64; 3] {
    let b = eval_b(z);
    let a = 1.0 / (1.0 + b * cosh_m1(x3));
    [a * z.re, a * z.im, a * b * x3.sinh()]
}

/// Inverse of [`chart_calx`] on the closed unit ball.
pub fn chart_calx_inverse(p: [f64; 3]) -> Result<ConformalCoords> {
    let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    if r2 > 1.0 + CHART_SLACK {
        return Err(FbmsError::OutOfChart(format!("|P|² = {r2}")));
    }
    let x3 = (2.0 * p[2] / (1.0 + r2)).clamp(-1.0, 1.0).atanh();
    let h = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if h == 0.0 {
        return Ok(ConformalCoords { z: Complex64::new(0.0, 0.0), x3 });
    }
    let c = x3.cosh();
    let disc = (1.0 - h * h * x3.sinh().powi(2)).max(0.0);
    let rho = h * (c + 1.0) / (1.0 + disc.sqrt());
    Ok(ConformalCoords { z: Complex64::new(p[0], p[1]) * (rho / h), x3 })
}

/// Helper for the spherical `(ψ, φ)` description: `z = sin ψ/(1 + cos ψ) e^{iφ}`.
pub fn psi_phi_to_z(psi: f64, phi: f64) -> Complex64 {
    Complex64::from_polar(psi.sin() / (1.0 + psi.cos()), phi)
}

/// Inverse of [`psi_phi_to_z`] for `|z| ≤ 1`, returning `(ψ, φ)` with `ψ ∈ [0, π/2]`.
pub fn z_to_psi_phi(z: Complex64) -> (f64, f64) {
    (2.0 * z.norm().atan(), z.arg())
}

/// `λ_m(ζ) = e^{2πim/n}(1+ζ)/(1−ζ)`; rejects `Re ζ > 0`.
pub fn lambda_m(zeta: Complex64, m: usize, n: usize) -> Result<Complex64> {
    if zeta.re > CHART_SLACK * (1.0 + zeta.norm()) || !zeta.is_finite() {
        return Err(FbmsError::OutOfChart(format!("Re ζ > 0: ζ={zeta}")));
    }
    Ok(root_of_unity(m, n) * (1.0 + zeta) / (1.0 - zeta))
}

/// Closed form inverse `ζ = (w − 1)/(w + 1)` with `w = z e^{−2πim/n}`.
pub fn lambda_m_inverse(z: Complex64, m: usize, n: usize) -> Result<Complex64> {
    if z.norm() > 1.0 + CHART_SLACK {
        return Err(FbmsError::OutOfChart(format!("|z| > 1: z={z}")));
    }
    let w = z * root_of_unity(m, n).conj();
    Ok((w - 1.0) / (w + 1.0))
}

/// `Λ_m(ζ, ξ3) = (λ_m(ζ), 2ξ3)`.
#[allow(non_snake_case)]
pub fn Lambda_m(zeta: Complex64, xi3: f64, m: usize, n: usize) -> Result<ConformalCoords> {
    Ok(ConformalCoords { z: lambda_m(zeta, m, n)?, x3: 2.0 * xi3 })
}

/// Pullback factors `(a, b)` of the Euclidean metric under `𝒳 ∘ Λ_m`.
pub fn pullback_factors(zeta: Complex64, xi3: f64) -> (f64, f64) {
    let b = 1.0 + zeta.norm_sqr();
    let a = 2.0 / ((1.0 - zeta).norm_sqr() + b * cosh_m1(2.0 * xi3));
    (a, b)
}

/// Partial derivatives of `a` in `(ξ1, ξ2, ξ3)` and of `b` in `(ξ1, ξ2)`.
pub fn pullback_factor_gradients(zeta: Complex64, xi3: f64) -> ([f64; 3], [f64; 2]) {
    let (x, y) = (zeta.re, zeta.im);
    let b = 1.0 + zeta.norm_sqr();
    let cm = cosh_m1(2.0 * xi3);
    let d = (1.0 - zeta).norm_sqr() + b * cm;
    let dd = [
        -2.0 * (1.0 - x) + 2.0 * x * cm,
        2.0 * y + 2.0 * y * cm,
        2.0 * b * (2.0 * xi3).sinh(),
    ];
    let k = -2.0 / (d * d);
    ([k * dd[0], k * dd[1], k * dd[2]], [2.0 * x, 2.0 * y])
}

/// Partial derivatives of `A` in `(x1, x2, x3)` and of `B` in `(x1, x2)`.
pub fn metric_factor_gradients(z: Complex64, x3: f64) -> ([f64; 3], [f64; 2]) {
    let b = eval_b(z);
    let a = eval_a(z, x3);
    let cm = cosh_m1(x3);
    let a2 = a * a;
    (
        [-a2 * z.re * cm, -a2 * z.im * cm, -a2 * b * x3.sinh()],
        [z.re, z.im],
    )
}

/// Mean curvature `2 sinh x3` of the cap `{x3 = const}` with respect to the
/// normal pointing towards increasing `x3`; sum of principal curvatures.
pub fn cap_mean_curvature(x3: f64) -> f64 {
    2.0 * x3.sinh()
}

/// `𝒳` applied to jets of `(z, x3)`.
pub fn calx_jet(z: &CJet, x3: Jet) -> [Jet; 3] {
    let b = (z.norm_sqr() + 1.0) * 0.5;
    let half = x3 * 0.5;
    let cm = half.sinh().sqr() * 2.0;
    let a = (b * cm + 1.0).recip();
    [a * z.re(), a * z.im(), a * b * x3.sinh()]
}

/// `λ_m` applied to a jet of `ζ` (no domain check).
pub fn lambda_jet(zeta: &CJet, m: usize, n: usize) -> CJet {
    let rot = root_of_unity(m, n);
    let q = 1.0 / (1.0 - zeta.v);
    let f = rot * (1.0 + zeta.v) * q;
    let f1 = rot * 2.0 * q * q;
    let f2 = rot * 4.0 * q * q * q;
    zeta.holo(f, f1, f2)
}

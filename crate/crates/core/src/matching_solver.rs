//! Scale matching between the Green-function graph and the catenoids.
//!
//! Genus one: `d(n) = g_n^{-1}(−n/2 + c(n) + 1)` with
//! `g_n(t) = log t − (n/2) t + 1/t`, then `ε̃ = 2 e^{−1−(n/2)d}`, `ε = d ε̃`,
//! `τ = ε`, `τ̃ = ε̃/n`. These values solve
//!
//! ```text
//! −ε̃ − εn/2          = ε̃ log(ε̃/2)
//! −ε̃ − εn/2 + ε c(n) = ε log(ε/2)
//! ```
//!
//! Genus zero keeps only the bridge equation with `ε̃ = 0`:
//! `−εn/2 + ε c(n) = ε log(ε/2)`, i.e. `ε = 2 e^{−n/2 + c(n)}`.

use crate::error::{FbmsError, Result};
use crate::green_functions::{expansion_constant_c, green_gn, GreenSeries};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Topology of the constructed surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum Genus {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl Genus {
    pub fn from_int(g: u32) -> Result<Self> {
        match g {
            0 => Ok(Genus::Zero),
            1 => Ok(Genus::One),
            _ => Err(FbmsError::InvalidParameter(format!("genus {g} not in {{0, 1}}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Genus::Zero => 0,
            Genus::One => 1,
        }
    }
}

/// All scales of the construction for a given `(n, genus)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingParams {
    pub n: usize,
    pub genus: Genus,
    pub eps: f64,
    pub eps_tilde: Option<f64>,
    pub tau: f64,
    pub tau_tilde: Option<f64>,
    pub c_n: f64,
    pub d_n: Option<f64>,
}

impl MatchingParams {
    /// `ε̃`, or zero for genus zero.
    pub fn eps_tilde_or_zero(&self) -> f64 {
        self.eps_tilde.unwrap_or(0.0)
    }

    pub fn tau_tilde_or_zero(&self) -> f64 {
        self.tau_tilde.unwrap_or(0.0)
    }

    /// Residuals of the balance equations, relative to `ε̃ log(ε̃/2)` and `ε log(ε/2)`.
    pub fn balance_residuals(&self) -> [f64; 2] {
        let (e, et, nf) = (self.eps, self.eps_tilde_or_zero(), self.n as f64);
        let bridge_rhs = e * (0.5 * e).ln();
        let bridge = (-et - e * nf / 2.0 + e * self.c_n - bridge_rhs).abs() / bridge_rhs.abs();
        let neck = if et > 0.0 {
            let rhs = et * (0.5 * et).ln();
            (-et - e * nf / 2.0 - rhs).abs() / rhs.abs()
        } else {
            0.0
        };
        [neck, bridge]
    }
}

/// `g_n(t) = log t − (n/2)t + 1/t`.
pub fn g_n_eval(t: f64, n: usize) -> Result<f64> {
    if t <= 0.0 || !t.is_finite() {
        return Err(FbmsError::InvalidParameter(format!("g_n needs t > 0, got {t}")));
    }
    Ok(t.ln() - 0.5 * n as f64 * t + 1.0 / t)
}

fn g_n_derivative(t: f64, n: usize) -> f64 {
    1.0 / t - 0.5 * n as f64 - 1.0 / (t * t)
}

/// Unique `t > 0` with `g_n(t) = y`.
pub fn invert_gn(y: f64, n: usize) -> Result<f64> {
    if !y.is_finite() {
        return Err(FbmsError::InvalidParameter(format!("g_n^-1 of {y}")));
    }
    let g = |t: f64| t.ln() - 0.5 * n as f64 * t + 1.0 / t;
    let (mut lo, mut hi) = (1e-12, 1e3);
    while g(lo) < y {
        lo *= 1e-3;
    }
    while g(hi) > y {
        hi *= 1e3;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let step = (g(t) - y) / g_n_derivative(t, n);
        let next = (t - step).clamp(lo, hi);
        if (next - t).abs() <= 1e-16 * t {
            t = next;
            break;
        }
        t = next;
    }
    Ok(t)
}

/// Solve the matching equations for `(n, genus)`.
pub fn solve_matching(n: usize, genus: Genus) -> Result<MatchingParams> {
    if n < 3 {
        return Err(FbmsError::InvalidParameter(format!("n = {n} < 3")));
    }
    let c = expansion_constant_c(n)?;
    let nf = n as f64;
    Ok(match genus {
        Genus::Zero => {
            let eps = 2.0 * (-0.5 * nf + c).exp();
            MatchingParams { n, genus, eps, eps_tilde: None, tau: eps, tau_tilde: None, c_n: c, d_n: None }
        }
        Genus::One => {
            let d = invert_gn(-0.5 * nf + c + 1.0, n)?;
            let et = 2.0 * (-1.0 - 0.5 * nf * d).exp();
            let eps = d * et;
            MatchingParams {
                n,
                genus,
                eps,
                eps_tilde: Some(et),
                tau: eps,
                tau_tilde: Some(et / nf),
                c_n: c,
                d_n: Some(d),
            }
        }
    })
}

/// `e^{−n/2 + c(n)}`, equal to `ε/2` for the genus zero scale.
pub fn genus0_unbalanced_scale(n: usize) -> Result<f64> {
    Ok((-0.5 * n as f64 + expansion_constant_c(n)?).exp())
}

/// Positive root of `s tanh s = 1`.
pub fn critical_catenoid_sstar() -> f64 {
    let f = |s: f64| s * s.tanh() - 1.0;
    let (mut lo, mut hi) = (1.0f64, 1.5f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..5 {
        let t = s.tanh();
        let df = t + s * (1.0 - t * t);
        s -= f(s) / df;
    }
    s
}

/// Where the matched expansion is probed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionRegion {
    /// Around `z = 0`, comparing `𝒢̃_n` with `2 ε̃ log(ε̃/(2|z|))`.
    Puncture,
    /// Around `z_n = 1`, comparing `τ G_n(zⁿ) + τ̃ G̃_n(zⁿ)` with `ε log(ε/(2|z−1|))`.
    RootM,
}

/// Log-log fit of the matching remainder on a geometric radius ladder.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub region: ExpansionRegion,
    pub radii: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// `|R(r_min)|` divided by the fitted model at `r_min`.
    pub constant_ratio: f64,
}

/// Geometric ladder of `k` radii from `lo` to `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

/// `τ G_n(zⁿ) + τ̃ G̃_n(zⁿ)`.
pub fn matched_green(p: &MatchingParams, z: Complex64) -> Result<f64> {
    let series = GreenSeries::new(p.n)?;
    let w = z.powu(p.n as u32);
    let mut v = p.tau * green_gn(w, &series)?.value;
    if let Some(tt) = p.tau_tilde {
        v += tt * (-(p.n as f64) - p.n as f64 * z.norm().ln());
    }
    Ok(v)
}

/// Sample the matching remainder and fit its decay rate.
pub fn verify_matched_expansion(p: &MatchingParams, region: ExpansionRegion) -> Result<FitReport> {
    let (scale, hi) = match region {
        ExpansionRegion::Puncture => match p.eps_tilde {
            Some(et) => (et, 0.1),
            None => {
                return Err(FbmsError::InvalidParameter("puncture expansion needs genus 1".into()));
            }
        },
        ExpansionRegion::RootM => (p.eps, 0.1),
    };
    let lo = 4.0 * scale;
    if lo >= hi {
        return Err(FbmsError::OutOfChart(format!("radius ladder [{lo}, {hi}] is empty")));
    }
    let radii = geometric_ladder(lo, hi, 8);
    let mut residuals = Vec::with_capacity(radii.len());
    for &r in &radii {
        let res = match region {
            ExpansionRegion::Puncture => {
                let z = Complex64::new(r, 0.0);
                let b = crate::ball_geometry::eval_b(z);
                matched_green(p, z)? / b - 2.0 * scale * (scale / (2.0 * r)).ln()
            }
            ExpansionRegion::RootM => {
                let z = Complex64::new(1.0 - r, 0.0);
                matched_green(p, z)? - scale * (scale / (2.0 * r)).ln()
            }
        };
        residuals.push(res.abs());
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let model = (intercept + slope * xs[0]).exp();
    Ok(FitReport { region, radii, residuals: residuals.clone(), slope, intercept, constant_ratio: residuals[0] / model })
}

/// Least-squares line `y = a x + b`; returns `(a, b)`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

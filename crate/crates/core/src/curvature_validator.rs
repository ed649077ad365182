//! Mean curvature of chart-sampled surfaces and the region-wise checks of the
//! approximate surface.
//!
//! `H = tr(g⁻¹h)` is the sum of principal curvatures with `h_ij = ⟨∂_ij P, ν⟩`
//! and `ν` positively oriented with respect to the chart parameters. It can be
//! computed from the Euclidean embedding or intrinsically in the conformal
//! charts with metrics `A²(|dz|² + B²dx3²)` and `a²(|dζ|² + b²dξ3²)`.

use crate::ball_geometry::{
    calx_unchecked, eval_a, eval_b, lambda_m, metric_factor_gradients, pullback_factor_gradients, pullback_factors,
};
use crate::error::{FbmsError, Result};
use crate::graph_operator::{cross3, dot3, norm3};
use crate::jet::Jet;
use crate::matching_solver::{least_squares_line, Genus};
use crate::surface_builder::{RegionKind, Resolution, SurfaceAtlas};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// First and second fundamental forms at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FundamentalForms {
    pub g: [[f64; 2]; 2],
    pub h: [[f64; 2]; 2],
    pub mean: f64,
    pub normal: [f64; 3],
}

impl FundamentalForms {
    fn from_parts(g: [[f64; 2]; 2], h: [[f64; 2]; 2], normal: [f64; 3]) -> Result<Self> {
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if !(det > 0.0) || !det.is_finite() {
            return Err(FbmsError::InvalidField(format!("degenerate first fundamental form, det = {det:e}")));
        }
        let mean = (g[1][1] * h[0][0] - 2.0 * g[0][1] * h[0][1] + g[0][0] * h[1][1]) / det;
        Ok(FundamentalForms { g, h, mean, normal })
    }

    /// Forms of a Euclidean embedding given as jets in the chart parameters.
    pub fn from_embedding(p: &[Jet; 3]) -> Result<Self> {
        let xu = [p[0].du, p[1].du, p[2].du];
        let xv = [p[0].dv, p[1].dv, p[2].dv];
        let d2 = [
            [p[0].duu, p[1].duu, p[2].duu],
            [p[0].duv, p[1].duv, p[2].duv],
            [p[0].dvv, p[1].dvv, p[2].dvv],
        ];
        euclidean_forms(xu, xv, d2)
    }

    pub fn gauss(&self) -> f64 {
        let dg = self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0];
        (self.h[0][0] * self.h[1][1] - self.h[0][1] * self.h[1][0]) / dg
    }
}

fn euclidean_forms(xu: [f64; 3], xv: [f64; 3], d2: [[f64; 3]; 3]) -> Result<FundamentalForms> {
    let c = cross3(xu, xv);
    let l = norm3(c);
    if !(l > 0.0) || !l.is_finite() {
        return Err(FbmsError::InvalidField("degenerate tangent plane".into()));
    }
    let nu = [c[0] / l, c[1] / l, c[2] / l];
    let g = [[dot3(xu, xu), dot3(xu, xv)], [dot3(xu, xv), dot3(xv, xv)]];
    let h = [[dot3(d2[0], nu), dot3(d2[1], nu)], [dot3(d2[1], nu), dot3(d2[2], nu)]];
    FundamentalForms::from_parts(g, h, nu)
}

/// Ambient chart in which surface samples are given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AmbientChart {
    /// Points of `R³`.
    Euclidean,
    /// `(Re z, Im z, x3)` with metric `g̃ = A²(|dz|² + B²dx3²)`.
    Conformal,
    /// `(Re ζ, Im ζ, ξ3)` of the `m`-th bridge, metric `g_m = a²(|dζ|² + b²dξ3²)`.
    HalfPlane { m: usize, n: usize },
}

/// How `H` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CurvatureRoute {
    EuclideanDirect,
    PullbackGm,
    PullbackGtilde,
}

/// Diagonal metric of a conformal chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChartMetric {
    Gm,
    Gtilde,
}

fn to_euclidean(chart: AmbientChart, y: [f64; 3]) -> Result<[f64; 3]> {
    match chart {
        AmbientChart::Euclidean => Ok(y),
        AmbientChart::Conformal => Ok(calx_unchecked(Complex64::new(y[0], y[1]), y[2])),
        AmbientChart::HalfPlane { m, n } => {
            let z = lambda_m(Complex64::new(y[0], y[1]), m, n)?;
            Ok(calx_unchecked(z, 2.0 * y[2]))
        }
    }
}

/// Metric factors `(λ, μ)` with `G = diag(λ², λ², λ²μ²)` and their gradients.
fn metric_data(metric: ChartMetric, y: [f64; 3]) -> (f64, f64, [f64; 3], [f64; 3]) {
    let z = Complex64::new(y[0], y[1]);
    match metric {
        ChartMetric::Gtilde => {
            let (da, db) = metric_factor_gradients(z, y[2]);
            (eval_a(z, y[2]), eval_b(z), da, [db[0], db[1], 0.0])
        }
        ChartMetric::Gm => {
            let (a, b) = pullback_factors(z, y[2]);
            let (da, db) = pullback_factor_gradients(z, y[2]);
            (a, b, da, [db[0], db[1], 0.0])
        }
    }
}

/// Christoffel symbols `Γ[k][i][j]` of `G = diag(λ², λ², λ²μ²)` at `y`.
pub fn christoffel(metric: ChartMetric, at: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
    let (l, m, dl, dm) = metric_data(metric, at);
    let gk = [l * l, l * l, l * l * m * m];
    let mut dg = [[0.0; 3]; 3]; // dg[k][i] = ∂_i g_k
    for i in 0..3 {
        dg[0][i] = 2.0 * l * dl[i];
        dg[1][i] = 2.0 * l * dl[i];
        dg[2][i] = 2.0 * l * m * m * dl[i] + 2.0 * l * l * m * dm[i];
    }
    let mut gam = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                if i == k {
                    v += dg[k][j];
                }
                if j == k {
                    v += dg[k][i];
                }
                if i == j {
                    v -= dg[i][k];
                }
                gam[k][i][j] = 0.5 * v / gk[k];
            }
        }
    }
    gam
}

/// Forms of a surface given by chart coordinates and their derivatives, computed
/// intrinsically in a conformal chart metric.
pub fn pullback_forms(metric: ChartMetric, y: [f64; 3], yu: [f64; 3], yv: [f64; 3], d2: [[f64; 3]; 3]) -> Result<FundamentalForms> {
    let (l, m, _, _) = metric_data(metric, y);
    let gd = [l * l, l * l, l * l * m * m];
    let inner = |a: [f64; 3], b: [f64; 3]| gd[0] * a[0] * b[0] + gd[1] * a[1] * b[1] + gd[2] * a[2] * b[2];
    let c = cross3(yu, yv);
    let mut nu = [c[0] / gd[0], c[1] / gd[1], c[2] / gd[2]];
    let ln = inner(nu, nu).sqrt();
    if !(ln > 0.0) || !ln.is_finite() {
        return Err(FbmsError::InvalidField("degenerate tangent plane".into()));
    }
    nu = [nu[0] / ln, nu[1] / ln, nu[2] / ln];
    let gam = christoffel(metric, y);
    let cov = |a: [f64; 3], b: [f64; 3], second: [f64; 3]| {
        let mut out = second;
        for (k, o) in out.iter_mut().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    *o += gam[k][i][j] * a[i] * b[j];
                }
            }
        }
        out
    };
    let g = [[inner(yu, yu), inner(yu, yv)], [inner(yu, yv), inner(yv, yv)]];
    let huu = inner(cov(yu, yu, d2[0]), nu);
    let huv = inner(cov(yu, yv, d2[1]), nu);
    let hvv = inner(cov(yv, yv, d2[2]), nu);
    // report the normal in R³ through the chart differential
    let e = 1e-7 * (1.0 + norm3(y));
    let p0 = metric_chart_embed(metric, y);
    let p1 = metric_chart_embed(metric, [y[0] + e * nu[0], y[1] + e * nu[1], y[2] + e * nu[2]]);
    let d = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let ld = norm3(d);
    FundamentalForms::from_parts(g, [[huu, huv], [huv, hvv]], [d[0] / ld, d[1] / ld, d[2] / ld])
}

fn metric_chart_embed(metric: ChartMetric, y: [f64; 3]) -> [f64; 3] {
    let z = Complex64::new(y[0], y[1]);
    match metric {
        ChartMetric::Gtilde => calx_unchecked(z, y[2]),
        ChartMetric::Gm => calx_unchecked((1.0 + z) / (1.0 - z), 2.0 * y[2]),
    }
}

/// Centred-difference derivatives `(y, y_u, y_v, [y_uu, y_uv, y_vv])` of a map.
fn stencil<F: Fn(f64, f64) -> Result<[f64; 3]>>(f: &F, u: f64, v: f64, h: f64) -> Result<([f64; 3], [f64; 3], [f64; 3], [[f64; 3]; 3])> {
    let c = f(u, v)?;
    let (pu, mu) = (f(u + h, v)?, f(u - h, v)?);
    let (pv, mv) = (f(u, v + h)?, f(u, v - h)?);
    let (pp, pm, mp, mm) = (f(u + h, v + h)?, f(u + h, v - h)?, f(u - h, v + h)?, f(u - h, v - h)?);
    let mut yu = [0.0; 3];
    let mut yv = [0.0; 3];
    let mut d2 = [[0.0; 3]; 3];
    for k in 0..3 {
        yu[k] = (pu[k] - mu[k]) / (2.0 * h);
        yv[k] = (pv[k] - mv[k]) / (2.0 * h);
        d2[0][k] = (pu[k] - 2.0 * c[k] + mu[k]) / (h * h);
        d2[1][k] = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
        d2[2][k] = (pv[k] - 2.0 * c[k] + mv[k]) / (h * h);
    }
    Ok((c, yu, yv, d2))
}

/// Mean curvature of the surface `(u, v) ↦ y(u, v)` given in `chart`, at each sample,
/// with centred differences of step `h`. Degenerate samples yield per-sample errors.
pub fn parametric_mean_curvature<F>(
    map: &F,
    chart: AmbientChart,
    samples: &[(f64, f64)],
    h: f64,
    route: CurvatureRoute,
) -> Result<Vec<Result<FundamentalForms>>>
where
    F: Fn(f64, f64) -> Result<[f64; 3]>,
{
    let metric = match (route, chart) {
        (CurvatureRoute::EuclideanDirect, _) => None,
        (CurvatureRoute::PullbackGtilde, AmbientChart::Conformal) => Some(ChartMetric::Gtilde),
        (CurvatureRoute::PullbackGm, AmbientChart::HalfPlane { .. }) => Some(ChartMetric::Gm),
        _ => {
            return Err(FbmsError::InvalidParameter(format!("route {route:?} does not apply to chart {chart:?}")));
        }
    };
    if !(h > 0.0) {
        return Err(FbmsError::InvalidParameter(format!("stencil step {h}")));
    }
    if let (Some(ChartMetric::Gm), AmbientChart::HalfPlane { m, .. }) = (metric, chart) {
        if m % chart_n(chart) != 0 {
            return Err(FbmsError::InvalidParameter("pullback route uses the chart at z = 1; rotate samples to m = n".into()));
        }
    }
    Ok(samples
        .iter()
        .map(|&(u, v)| match metric {
            None => {
                let e = |a: f64, b: f64| to_euclidean(chart, map(a, b)?);
                let (_, xu, xv, d2) = stencil(&e, u, v, h)?;
                euclidean_forms(xu, xv, d2)
            }
            Some(mt) => {
                let (y, yu, yv, d2) = stencil(map, u, v, h)?;
                pullback_forms(mt, y, yu, yv, d2)
            }
        })
        .collect())
}

fn chart_n(chart: AmbientChart) -> usize {
    match chart {
        AmbientChart::HalfPlane { n, .. } => n,
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// Region estimates

/// Region of the region-wise estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EstimateRegion {
    Bridge,
    Neck,
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub eps: f64,
    pub eps_tilde: Option<f64>,
    /// `sup |H| cosh σ` (bridge), `sup |H|` (neck) or the normalized graph ratio.
    pub value: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub region: EstimateRegion,
    pub genus: Genus,
    pub rows: Vec<EstimateRow>,
    /// Slope of `log value` against `log ε̃` (neck only).
    pub fitted_slope: Option<f64>,
    /// `max value / min value` across the sweep.
    pub spread: f64,
}

/// Exponent `β` of the graph normalization.
pub const BETA: f64 = 0.1;

fn graph_weight(z: Complex64, n: usize, eps: f64, genus: Genus) -> f64 {
    let mut s: f64 = (0..n).map(|m| (z - crate::ball_geometry::root_of_unity(m, n)).norm().powi(-4)).sum();
    if genus == Genus::One {
        s += z.norm().powi(-4);
    }
    eps.powf(3.0 - BETA) * s
}

/// One row of the estimate for a given atlas.
pub fn region_estimate_row(atlas: &SurfaceAtlas, region: EstimateRegion) -> Result<EstimateRow> {
    let p = *atlas.params();
    let l = *atlas.layout();
    let mut value: f64 = 0.0;
    let mut samples = 0;
    match region {
        EstimateRegion::Bridge => {
            let b = &atlas.bridge;
            for i in 0..b.ns - 1 {
                let sigma = b.sigma(i);
                if p.eps * sigma.cosh() >= l.bridge_band[0] {
                    continue;
                }
                for j in 0..=b.nt {
                    let h = atlas.bridge_node(i, j)?.forms(Jet::constant(0.0))?.mean;
                    value = value.max(h.abs() * sigma.cosh());
                    samples += 1;
                }
            }
        }
        EstimateRegion::Neck => {
            let band = l.neck_band.ok_or_else(|| FbmsError::InvalidParameter("neck estimate not applicable to genus 0".into()))?;
            let r = &atlas.radial;
            for i in 0..r.nr {
                if r.radius(i) >= band[0] {
                    break;
                }
                for j in 0..r.na {
                    let h = atlas.radial_node(i, j)?.forms(Jet::constant(0.0))?.mean;
                    value = value.max(h.abs());
                    samples += 1;
                }
            }
        }
        EstimateRegion::Graph => {
            let r = &atlas.radial;
            let nhi = l.neck_band.map_or(0.0, |b| b[1]);
            for i in 0..r.nr {
                for j in 0..r.na {
                    let z = r.z(i, j);
                    if z.norm() < nhi || atlas.base.bridge_radius(z)? < l.bridge_band[1] || atlas.is_hole(i, j) {
                        continue;
                    }
                    let h = atlas.radial_node(i, j)?.forms(Jet::constant(0.0))?.mean;
                    value = value.max(h.abs() / graph_weight(z, p.n, p.eps, p.genus));
                    samples += 1;
                }
            }
        }
    }
    if samples == 0 {
        return Err(FbmsError::InvalidParameter(format!("no samples in region {region:?}")));
    }
    Ok(EstimateRow { n: p.n, eps: p.eps, eps_tilde: p.eps_tilde, value, samples })
}

/// Sweep an estimate over several `n`.
pub fn validate_region_estimate(region: EstimateRegion, genus: Genus, ns: &[usize], resolution: Resolution) -> Result<EstimateReport> {
    if region == EstimateRegion::Neck && genus == Genus::Zero {
        return Err(FbmsError::InvalidParameter("neck estimate not applicable to genus 0".into()));
    }
    let rows = ns
        .iter()
        .map(|&n| region_estimate_row(&SurfaceAtlas::new(n, genus, resolution)?, region))
        .collect::<Result<Vec<_>>>()?;
    let fitted_slope = if region == EstimateRegion::Neck && rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.eps_tilde.unwrap_or(r.eps).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.value.ln()).collect();
        Some(least_squares_line(&xs, &ys).0)
    } else {
        None
    };
    let max = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    Ok(EstimateReport { region, genus, rows, fitted_slope, spread: max / min })
}

// ---------------------------------------------------------------------------
// Linearization

/// Result of comparing `d/dt H(t w)` with the principal part of the linearization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearizationReport {
    pub region: RegionKind,
    pub ts: Vec<f64>,
    /// `sup |DH_t(w) − P w| / sup |P w|` for each `t`.
    pub relative_defects: Vec<f64>,
    pub samples: usize,
}

/// Trial perturbation and its principal-part image at a chart point.
fn trial(region: RegionKind, atlas: &SurfaceAtlas) -> Result<Vec<(crate::surface_builder::NodeGeometry, Jet, f64)>> {
    let p = *atlas.params();
    let l = *atlas.layout();
    let mut out = Vec::new();
    match region {
        RegionKind::NeckCatenoid => {
            let et = p.eps_tilde.ok_or_else(|| FbmsError::InvalidParameter("neck needs genus 1".into()))?;
            let s_top = (l.neck_band.unwrap()[0] / et).acosh();
            let nf = p.n as f64;
            for a in 0..24 {
                let s = s_top * a as f64 / 24.0;
                for b in 0..8 {
                    let phi = PI / nf * (b as f64 + 0.5) / 8.0;
                    let (sj, pj) = (Jet::var_u(s), Jet::var_v(phi));
                    let geo = atlas.base.neck_node(sj, pj)?;
                    let w = (-(sj * 0.6).sqr()).exp() * ((pj * nf).cos() * 0.3 + 1.0) * et;
                    let ch2 = s.cosh().powi(2);
                    let pw = (w.duu + w.dvv + 2.0 * w.v / ch2) / (2.0 * et * et * ch2);
                    out.push((geo, w, pw));
                }
            }
        }
        RegionKind::BridgeCatenoid => {
            let s_top = (l.bridge_band[0] / p.eps).acosh();
            for a in 0..24 {
                let s = s_top * a as f64 / 24.0;
                for b in 0..=8 {
                    let th = 0.5 * PI + 0.5 * PI * b as f64 / 8.0;
                    let (sj, tj) = (Jet::var_u(s), Jet::var_v(th));
                    let mut geo = atlas.base.bridge_node(sj, tj)?;
                    if b == 0 {
                        geo.c.v.re = 0.0;
                    }
                    let w = (-(sj * 0.5).sqr()).exp() * ((tj * 2.0).cos() * 0.3 + 1.0) * p.eps;
                    let ch2 = s.cosh().powi(2);
                    let pw = (w.duu + w.dvv + 2.0 * w.v / ch2) / (p.eps * p.eps * ch2);
                    out.push((geo, w, pw));
                }
            }
        }
        RegionKind::Graph => {
            let sector = PI / p.n as f64;
            let z0 = Complex64::from_polar(0.5, 0.5 * sector);
            let width = 0.25 * sector.sin();
            for a in 0..16 {
                for b in 0..16 {
                    let x = z0.re + width * (a as f64 / 7.5 - 1.0);
                    let y = z0.im + width * (b as f64 / 7.5 - 1.0);
                    let (xj, yj) = (Jet::var_u(x), Jet::var_v(y));
                    let zj = crate::jet::CJet::from_parts(xj, yj);
                    let geo = atlas.base.disk_node(zj)?;
                    let d2 = (xj - z0.re).sqr() + (yj - z0.im).sqr();
                    let w = (-(d2 / (width * width))).exp() * 1e-2;
                    let bz = 0.5 * (1.0 + x * x + y * y);
                    let pw = bz * (w.duu + w.dvv) + 2.0 * (x * w.du + y * w.dv) + 2.0 * w.v;
                    out.push((geo, w, pw));
                }
            }
        }
        _ => {
            return Err(FbmsError::InvalidParameter(format!("linearization check not defined on {region:?}")));
        }
    }
    Ok(out)
}

/// Compare centred differences of `t ↦ H(t w)` with the principal part of the linearization.
pub fn linearization_consistency(atlas: &SurfaceAtlas, region: RegionKind, ts: &[f64]) -> Result<LinearizationReport> {
    let pts = trial(region, atlas)?;
    let mut relative_defects = Vec::with_capacity(ts.len());
    for &t in ts {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (geo, w, pw) in &pts {
            let hp = geo.forms(*w * t)?.mean;
            let hm = geo.forms(*w * (-t))?.mean;
            let dh = (hp - hm) / (2.0 * t);
            num = num.max((dh - pw).abs());
            den = den.max(pw.abs());
        }
        relative_defects.push(num / den);
    }
    Ok(LinearizationReport { region, ts: ts.to_vec(), relative_defects, samples: pts.len() })
}

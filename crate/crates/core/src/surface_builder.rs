//! Approximate surface: chart layout, cutoff profiles, base geometry as jets,
//! normal displacements and the symmetric triangle mesh.
//!
//! Everything is computed on the upper sheet over the fundamental sector
//! `0 ≤ arg z ≤ π/n` and replicated by the `4n` symmetries generated by the
//! rotation `z ↦ e^{2πi/n} z`, the conjugation `z ↦ z̄` and the flip `x3 ↦ −x3`.

use crate::ball_geometry::{calx_jet, lambda_jet, lambda_m_inverse, root_of_unity};
use crate::curvature_validator::FundamentalForms;
use crate::cutoff::step_down;
use crate::error::{FbmsError, Result};
use crate::graph_operator::{cross3, dot3, norm3};
use crate::green_functions::{gn_composed_holo, gnt_composed_holo};
use crate::grid::{fd_jet, interp_eval, interp_weights, BridgeGrid, RadialGrid};
use crate::jet::{CJet, Jet};
use crate::matching_solver::{solve_matching, Genus, MatchingParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

/// The five kinds of region of the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionKind {
    Graph,
    NeckGluing,
    BridgeGluing,
    NeckCatenoid,
    BridgeCatenoid,
}

impl RegionKind {
    /// Object name used in OBJ output.
    pub fn obj_name(self) -> &'static str {
        match self {
            RegionKind::Graph => "gr",
            RegionKind::NeckGluing => "glu0",
            RegionKind::BridgeGluing => "glum",
            RegionKind::NeckCatenoid => "cat0",
            RegionKind::BridgeCatenoid => "catm",
        }
    }
}

/// Chart carrying a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartId {
    /// Polar `(r, φ)` chart of the disk.
    Disk,
    /// Catenoidal `(s, φ)` chart of the neck.
    Neck,
    /// `(σ, θ)` chart of the `m`-th bridge.
    Bridge(usize),
}

/// A region with its chart and parameter rectangle `[u0, u1] × [v0, v1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub chart: ChartId,
    pub rect: [f64; 4],
    pub resolution: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionPreset {
    Coarse,
    #[default]
    Default,
    Fine,
}

impl std::str::FromStr for ResolutionPreset {
    type Err = FbmsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(ResolutionPreset::Coarse),
            "default" => Ok(ResolutionPreset::Default),
            "fine" => Ok(ResolutionPreset::Fine),
            _ => Err(FbmsError::InvalidParameter(format!("unknown resolution '{s}'"))),
        }
    }
}

/// Discretization sizes. `refine` multiplies the mesh density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Resolution {
    pub preset: ResolutionPreset,
    pub refine: usize,
}

impl Resolution {
    pub fn new(preset: ResolutionPreset) -> Self {
        Resolution { preset, refine: 1 }
    }

    pub fn refined(self, k: usize) -> Self {
        Resolution { refine: self.refine * k.max(1), ..self }
    }

    /// Angular cells of a mesh patch across the half sector or the bridge quarter.
    pub fn mesh_angle_cells(&self) -> usize {
        let base = match self.preset {
            ResolutionPreset::Coarse => 8,
            ResolutionPreset::Default => 12,
            ResolutionPreset::Fine => 18,
        };
        base * self.refine
    }

    /// Target step in the catenoid parameters `σ` and `s` of the mesh.
    pub fn mesh_log_step(&self) -> f64 {
        let base = match self.preset {
            ResolutionPreset::Coarse => 0.3,
            ResolutionPreset::Default => 0.2,
            ResolutionPreset::Fine => 0.13,
        };
        base / self.refine as f64
    }

    /// `(rings, angles)` of the polar solver grid.
    pub fn solver_radial(&self, genus: Genus) -> (usize, usize) {
        let (g0, g1, na) = match self.preset {
            ResolutionPreset::Coarse => (40, 64, 8),
            ResolutionPreset::Default => (64, 96, 12),
            ResolutionPreset::Fine => (96, 144, 16),
        };
        let nr = if genus == Genus::Zero { g0 } else { g1 };
        (nr * self.refine, na * self.refine)
    }

    /// `(σ step, angular cells)` of the bridge solver grid.
    pub fn solver_bridge(&self) -> (f64, usize) {
        let (ds, nt) = match self.preset {
            ResolutionPreset::Coarse => (0.2, 8),
            ResolutionPreset::Default => (0.14, 12),
            ResolutionPreset::Fine => (0.1, 16),
        };
        (ds / self.refine as f64, nt * self.refine)
    }
}

/// Radii that place the charts and mesh patches.
///
/// `ρ = 2|λ⁻¹(z)|` near a bridge and `r = |z|` near the neck.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartLayout {
    /// Outer radius of the bridge solver chart.
    pub rho_bridge: f64,
    /// Polar-grid nodes with `ρ` below this are interpolated from the bridge chart.
    pub rho_hole: f64,
    /// Interface between the structured bridge patch and the triangulated disk.
    pub rho_mesh: f64,
    /// Interface between the structured neck patch and the triangulated disk.
    pub r_mesh: Option<f64>,
    /// Cutoff band of the bridges in `ρ`.
    pub bridge_band: [f64; 2],
    /// Cutoff band of the neck in `r`.
    pub neck_band: Option<[f64; 2]>,
}

/// Feasibility margins of the layout.
pub const HOLE_MARGIN: f64 = 1.15;
pub const NECK_CLEARANCE: f64 = 1.2;

/// Choose the chart radii for `p`, or report the violated inequality.
pub fn chart_layout(p: &MatchingParams) -> Result<ChartLayout> {
    let sn = (PI / p.n as f64).sin();
    let rho_bridge = (0.8 * sn).min(0.5);
    let rho_hole = 0.65 * rho_bridge;
    let rho_mesh = 0.8 * rho_bridge;
    let e23 = p.eps.powf(2.0 / 3.0);
    let bridge_band = [0.5 * e23, 2.0 * e23];
    if HOLE_MARGIN * bridge_band[1] > rho_hole {
        return Err(FbmsError::Infeasible(format!(
            "bridge gluing zone does not fit in its chart: need {HOLE_MARGIN}·2ε^(2/3) = {:.4} ≤ 0.52·min(0.8 sin(π/n), 0.5) = {:.4} (n = {})",
            HOLE_MARGIN * bridge_band[1],
            rho_hole,
            p.n
        )));
    }
    let (r_mesh, neck_band) = match p.eps_tilde {
        None => (None, None),
        Some(et) => {
            let h = et.sqrt();
            let r_mesh = 3.0 * h;
            if r_mesh > 1.0 - NECK_CLEARANCE * rho_bridge {
                return Err(FbmsError::Infeasible(format!(
                    "neck cutoff region reaches the bridges: need 3ε̃^(1/2) = {r_mesh:.4} ≤ 1 − {NECK_CLEARANCE}·ρ_B = {:.4} (n = {})",
                    1.0 - NECK_CLEARANCE * rho_bridge,
                    p.n
                )));
            }
            (Some(r_mesh), Some([0.5 * h, 2.0 * h]))
        }
    };
    Ok(ChartLayout { rho_bridge, rho_hole, rho_mesh, r_mesh, bridge_band, neck_band })
}

/// Description of the symmetry group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryGroup {
    pub n: usize,
    pub order: usize,
    pub generators: Vec<String>,
}

impl SymmetryGroup {
    pub fn new(n: usize) -> Self {
        SymmetryGroup {
            n,
            order: 4 * n,
            generators: vec![
                format!("rotation by 2π/{n} about the x3 axis"),
                "reflection y ↦ −y".into(),
                "reflection x3 ↦ −x3".into(),
            ],
        }
    }

    /// All `4n` elements as `(rotation index, conjugate, flip)`.
    pub fn elements(&self) -> Vec<(usize, bool, bool)> {
        let mut out = Vec::with_capacity(self.order);
        for flip in [false, true] {
            for conj in [false, true] {
                for k in 0..self.n {
                    out.push((k, conj, flip));
                }
            }
        }
        out
    }

    pub fn apply(&self, (k, conj, flip): (usize, bool, bool), p: [f64; 3]) -> [f64; 3] {
        let (x, mut y, mut z) = (p[0], p[1], p[2]);
        if flip {
            z = -z;
        }
        if conj {
            y = -y;
        }
        if k == 0 {
            return [x, y, z];
        }
        let w = root_of_unity(k, self.n) * Complex64::new(x, y);
        [w.re, w.im, z]
    }
}

/// Cutoff functions of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffProfile {
    /// Neck blend in `r`: 1 below `½ε̃^{1/2}`, 0 above `2ε̃^{1/2}`.
    Eta0,
    /// Bridge blend in `ρ`: 1 below `½ε^{2/3}`, 0 above `2ε^{2/3}`.
    EtaBar,
    /// Neck deficiency cutoff in `r`: 1 below `2ε̃^{1/2}`, 0 above `3ε̃^{1/2}`.
    Kappa0,
    /// Bridge deficiency cutoff in `ρ`: 1 below `2ε^{2/3}`, 0 above `3ε^{2/3}`.
    KappaBar,
    /// Neck partition function on the sheet disks: 0 below `e^{−S−s_ε̃}`, 1 above `e^{−s−s_ε̃}`.
    Xi0,
    /// Bridge partition function: 0 below `e^{−Σ}`, 1 above `e^{−σ}`.
    XiBar,
    /// Switch in the catenoid parameter: 0 below −1, 1 above 1.
    Theta,
}

/// Transition interval of a profile; `decreasing` profiles go from 1 to 0.
fn cutoff_band(profile: CutoffProfile, p: &MatchingParams) -> Result<([f64; 2], bool)> {
    let e23 = p.eps.powf(2.0 / 3.0);
    let neck = || {
        p.eps_tilde
            .ok_or_else(|| FbmsError::InvalidParameter(format!("{profile:?} needs genus 1")))
    };
    Ok(match profile {
        CutoffProfile::Eta0 => {
            let h = neck()?.sqrt();
            ([0.5 * h, 2.0 * h], true)
        }
        CutoffProfile::EtaBar => ([0.5 * e23, 2.0 * e23], true),
        CutoffProfile::Kappa0 => {
            let h = neck()?.sqrt();
            ([2.0 * h, 3.0 * h], true)
        }
        CutoffProfile::KappaBar => ([2.0 * e23, 3.0 * e23], true),
        CutoffProfile::Xi0 => {
            let et = neck()?;
            let h = et.sqrt();
            let s_eps = (2.0 / et).ln();
            let (s_lo, s_hi) = ((0.5 * h / et).acosh(), (2.0 * h / et).acosh());
            ([(-s_hi - s_eps).exp(), (-s_lo - s_eps).exp()], false)
        }
        CutoffProfile::XiBar => {
            let (s_lo, s_hi) = ((0.5 * e23 / p.eps).acosh(), (2.0 * e23 / p.eps).acosh());
            ([(-s_hi).exp(), (-s_lo).exp()], false)
        }
        CutoffProfile::Theta => ([-1.0, 1.0], false),
    })
}

/// Value and first two derivatives of a cutoff profile.
pub fn cutoff_derivs(profile: CutoffProfile, x: f64, p: &MatchingParams) -> Result<[f64; 3]> {
    if !x.is_finite() || (profile != CutoffProfile::Theta && x < 0.0) {
        return Err(FbmsError::InvalidParameter(format!("{profile:?} at x = {x}")));
    }
    let ([lo, hi], decreasing) = cutoff_band(profile, p)?;
    let d = step_down(x, lo, hi);
    Ok(if decreasing { d } else { [1.0 - d[0], -d[1], -d[2]] })
}

pub fn cutoff_eval(profile: CutoffProfile, x: f64, p: &MatchingParams) -> Result<f64> {
    Ok(cutoff_derivs(profile, x, p)?[0])
}

fn cutoff_jet(profile: CutoffProfile, x: Jet, p: &MatchingParams) -> Result<Jet> {
    let [f, f1, f2] = cutoff_derivs(profile, x.v, p)?;
    Ok(x.lift(f, f1, f2))
}

fn green_value(p: &MatchingParams, z: Complex64) -> Result<f64> {
    let mut g = p.tau * gn_composed_holo(z, p.n)?[0].re;
    if let Some(tt) = p.tau_tilde {
        g += tt * gnt_composed_holo(z, p.n)?[0].re;
    }
    Ok(g / (0.5 * (1.0 + z.norm_sqr())))
}

/// Bridge height profile `(1 − η̄)·½𝒢(λ_m(ρ/2 e^{iθ})) − η̄·(ε/2) arccosh(ρ/ε)`.
pub fn bridge_profile(rho: f64, theta: f64, m: usize, p: &MatchingParams) -> Result<f64> {
    if !(rho >= p.eps) || !rho.is_finite() {
        return Err(FbmsError::OutOfChart(format!("ρ = {rho} below the bridge waist ε = {}", p.eps)));
    }
    if !(FRAC_PI_2 - 1e-12..=1.5 * PI + 1e-12).contains(&theta) {
        return Err(FbmsError::OutOfChart(format!("θ = {theta} outside [π/2, 3π/2]")));
    }
    let eta = cutoff_eval(CutoffProfile::EtaBar, rho, p)?;
    let cat = -0.5 * p.eps * (rho / p.eps).acosh();
    let graph = if eta < 1.0 {
        let z = crate::ball_geometry::lambda_m(Complex64::from_polar(0.5 * rho, theta), m, p.n)?;
        0.5 * green_value(p, z)?
    } else {
        0.0
    };
    Ok((1.0 - eta) * graph + eta * cat)
}

/// Neck height profile `(1 − η⁰)𝒢̃(re^{iφ}) − η⁰·2ε̃ arccosh(r/ε̃)`.
pub fn neck_profile(r: f64, phi: f64, p: &MatchingParams) -> Result<f64> {
    let et = p
        .eps_tilde
        .ok_or_else(|| FbmsError::InvalidParameter("neck profile needs genus 1".into()))?;
    if !(r >= et) || r > 1.0 {
        return Err(FbmsError::OutOfChart(format!("r = {r} outside [ε̃, 1]")));
    }
    let eta = cutoff_eval(CutoffProfile::Eta0, r, p)?;
    let cat = -2.0 * et * (r / et).acosh();
    let graph = if eta < 1.0 { green_value(p, Complex64::from_polar(r, phi))? } else { 0.0 };
    Ok((1.0 - eta) * graph + eta * cat)
}

/// Base point and displacement direction of a chart point, as jets.
///
/// For a bridge chart `(c, h)` are `(ζ, ξ3)` and the embedding applies `Λ`;
/// otherwise they are `(z, x3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeGeometry {
    pub c: CJet,
    pub h: Jet,
    pub dc: CJet,
    pub dh: Jet,
    pub bridge: Option<(usize, usize)>,
}

impl NodeGeometry {
    /// Euclidean position of `base + w Ξ` as jets.
    pub fn embed(&self, w: Jet) -> [Jet; 3] {
        let c = self.c.add(&self.dc.mul_real(w));
        let h = self.h + self.dh * w;
        match self.bridge {
            Some((m, n)) => calx_jet(&lambda_jet(&c, m, n), h * 2.0),
            None => calx_jet(&c, h),
        }
    }

    pub fn position(&self, w: f64) -> [f64; 3] {
        let p = self.embed(Jet::constant(w));
        [p[0].v, p[1].v, p[2].v]
    }

    /// Second fundamental form data of the displaced surface.
    pub fn forms(&self, w: Jet) -> Result<FundamentalForms> {
        FundamentalForms::from_embedding(&self.embed(w))
    }
}

/// Upper sheet of the approximate surface.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseSurface {
    pub params: MatchingParams,
    pub layout: ChartLayout,
}

impl BaseSurface {
    pub fn new(params: MatchingParams) -> Result<Self> {
        Ok(BaseSurface { layout: chart_layout(&params)?, params })
    }

    /// `(τ Re F + τ̃ Re F̃)/B`, the matched Green function divided by `B`.
    pub fn green(&self, z: &CJet) -> Result<Jet> {
        let p = &self.params;
        let [f0, f1, f2] = gn_composed_holo(z.v, p.n)?;
        let mut g = z.holo(f0, f1, f2).re() * p.tau;
        if let Some(tt) = p.tau_tilde {
            let [h0, h1, h2] = gnt_composed_holo(z.v, p.n)?;
            g += z.holo(h0, h1, h2).re() * tt;
        }
        let b = (z.norm_sqr() + 1.0) * 0.5;
        Ok(g / b)
    }

    fn nearest_root(&self, z: Complex64) -> usize {
        let n = self.params.n as f64;
        ((z.arg() * n / (2.0 * PI)).round() as i64).rem_euclid(self.params.n as i64) as usize
    }

    /// `ρ = 2|λ_m⁻¹(z)|` for the nearest root.
    pub fn bridge_radius(&self, z: Complex64) -> Result<f64> {
        Ok(2.0 * lambda_m_inverse(z, self.nearest_root(z), self.params.n)?.norm())
    }

    /// `η̄(ρ)(𝒢 + ε arccosh(ρ/ε))`, the bridge correction of `−𝒢`.
    fn bridge_term(&self, z: &CJet, g: Jet) -> Result<Jet> {
        let p = &self.params;
        let m = self.nearest_root(z.v);
        let c = root_of_unity(m, p.n).conj();
        let w = z.v * c;
        if (w + 1.0).norm() < 1e-300 {
            return Ok(Jet::constant(0.0));
        }
        let q = 1.0 / (w + 1.0);
        let zeta = z.holo((w - 1.0) * q, 2.0 * c * q * q, -4.0 * c * c * q * q * q);
        let rho = zeta.norm_sqr().sqrt() * 2.0;
        if rho.v >= self.layout.bridge_band[1] {
            return Ok(Jet::constant(0.0));
        }
        if rho.v <= p.eps {
            return Err(FbmsError::OutOfChart(format!("z = {} inside the bridge waist", z.v)));
        }
        let eta = cutoff_jet(CutoffProfile::EtaBar, rho, p)?;
        Ok(eta * (g + (rho / p.eps).acosh() * p.eps))
    }

    /// Height of the upper sheet over a disk point, `−𝒢` corrected near the neck and bridges.
    pub fn height(&self, z: &CJet) -> Result<Jet> {
        let g = self.green(z)?;
        let mut x3 = -g + self.bridge_term(z, g)?;
        if let (Some(et), Some(band)) = (self.params.eps_tilde, self.layout.neck_band) {
            let r = z.norm_sqr().sqrt();
            if r.v < band[1] {
                if r.v <= et {
                    return Err(FbmsError::OutOfChart(format!("|z| = {} inside the neck", r.v)));
                }
                let eta = cutoff_jet(CutoffProfile::Eta0, r, &self.params)?;
                x3 += eta * (g + (r / et).acosh() * (2.0 * et));
            }
        }
        Ok(x3)
    }

    /// Disk chart point with vertical displacement.
    pub fn disk_node(&self, z: CJet) -> Result<NodeGeometry> {
        Ok(NodeGeometry {
            c: z,
            h: self.height(&z)?,
            dc: CJet::default(),
            dh: Jet::constant(1.0),
            bridge: None,
        })
    }

    /// Neck chart point `z = ε̃ cosh s e^{iφ}`, displaced along `(1 − η⁰)∂x3 + η⁰·½𝒩̃`.
    pub fn neck_node(&self, s: Jet, phi: Jet) -> Result<NodeGeometry> {
        let p = &self.params;
        let et = p
            .eps_tilde
            .ok_or_else(|| FbmsError::InvalidParameter("neck chart needs genus 1".into()))?;
        let ch = s.cosh();
        let r = ch * et;
        let z = CJet::polar(r, phi);
        let g = self.green(&z)?;
        let eta = cutoff_jet(CutoffProfile::Eta0, r, p)?;
        let x3 = -g + eta * (g + s * (2.0 * et)) + self.bridge_term(&z, g)?;
        let b = (r.sqr() + 1.0) * 0.5;
        let a = (b * ((s * (2.0 * et)).cosh() - 1.0) + 1.0).recip();
        let th = s.tanh();
        let root = (b.sqr() * 4.0 / ch.sqr() + th.sqr()).sqrt();
        let k = (a * root).recip() * 0.5 * eta;
        let dir = CJet::polar(Jet::constant(1.0), phi);
        Ok(NodeGeometry {
            c: z,
            h: x3,
            dc: dir.mul_real(-(k * b * 2.0 / ch)),
            dh: -eta + 1.0 + k * th / b,
            bridge: None,
        })
    }

    /// Bridge chart point `ζ = (ε/2) cosh σ e^{iθ}` at `z = 1`, displaced along
    /// `½((1 − η̄)∂ξ3 + η̄ a𝒩)`.
    pub fn bridge_node(&self, sigma: Jet, theta: Jet) -> Result<NodeGeometry> {
        let p = &self.params;
        let ch = sigma.cosh();
        let rho = ch * p.eps;
        let e = CJet::polar(Jet::constant(1.0), theta);
        let zeta = e.mul_real(rho * 0.5);
        let z = lambda_jet(&zeta, p.n, p.n);
        let g = self.green(&z)?;
        let eta = cutoff_jet(CutoffProfile::EtaBar, rho, p)?;
        let x3 = -(g * (-eta + 1.0)) + eta * sigma * p.eps;
        let b = zeta.norm_sqr() + 1.0;
        let sh = sigma.sinh();
        let root = (b.sqr() + sh.sqr()).sqrt();
        let k = eta * 0.5 / root;
        Ok(NodeGeometry {
            c: zeta,
            h: x3 * 0.5,
            dc: e.mul_real(-(k * b)),
            dh: (-eta + 1.0) * 0.5 + k * sh / b,
            bridge: Some((p.n, p.n)),
        })
    }

    /// Regions claiming a disk point of the upper sheet.
    pub fn regions_at(&self, z: Complex64) -> Result<Vec<RegionKind>> {
        let rho = self.bridge_radius(z)?;
        let [blo, bhi] = self.layout.bridge_band;
        let mut out = Vec::new();
        let r = z.norm();
        let (nlo, nhi) = match self.layout.neck_band {
            Some([a, b]) => (a, b),
            None => (-1.0, -1.0),
        };
        if rho <= blo {
            out.push(RegionKind::BridgeCatenoid);
        }
        if (blo..=bhi).contains(&rho) {
            out.push(RegionKind::BridgeGluing);
        }
        if r <= nlo {
            out.push(RegionKind::NeckCatenoid);
        }
        if nhi > 0.0 && (nlo..=nhi).contains(&r) {
            out.push(RegionKind::NeckGluing);
        }
        if rho >= bhi && r >= nhi {
            out.push(RegionKind::Graph);
        }
        Ok(out)
    }
}

fn region_from_radius(r: f64, band: [f64; 2], cat: RegionKind, glu: RegionKind) -> RegionKind {
    if r < band[0] {
        cat
    } else if r < band[1] {
        glu
    } else {
        RegionKind::Graph
    }
}

/// Charts, grids and regions of a construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceAtlas {
    pub base: BaseSurface,
    pub resolution: Resolution,
    pub regions: Vec<RegionSpec>,
    pub symmetry: SymmetryGroup,
    pub radial: RadialGrid,
    pub bridge: BridgeGrid,
}

impl SurfaceAtlas {
    pub fn new(n: usize, genus: Genus, resolution: Resolution) -> Result<Self> {
        let params = solve_matching(n, genus)?;
        Self::from_params(params, resolution)
    }

    pub fn from_params(params: MatchingParams, resolution: Resolution) -> Result<Self> {
        let base = BaseSurface::new(params)?;
        let l = base.layout;
        let (nr, na) = resolution.solver_radial(params.genus);
        let radial = RadialGrid::new(params.n, params.eps_tilde, nr, na)?;
        let (ds, nt) = resolution.solver_bridge();
        let sigma_b = (l.rho_bridge / params.eps).acosh();
        let ns = ((sigma_b / ds).ceil() as usize + 1).max(8);
        let bridge = BridgeGrid::new(params.n, params.eps, l.rho_bridge, ns, nt)?;
        let mut regions = Vec::new();
        let sig = |rho: f64| (rho / params.eps).max(1.0).acosh();
        let [blo, bhi] = l.bridge_band;
        for m in 0..params.n {
            regions.push(RegionSpec {
                kind: RegionKind::BridgeCatenoid,
                chart: ChartId::Bridge(m),
                rect: [0.0, sig(blo), FRAC_PI_2, 1.5 * PI],
                resolution: [ns, 2 * nt],
            });
            regions.push(RegionSpec {
                kind: RegionKind::BridgeGluing,
                chart: ChartId::Bridge(m),
                rect: [sig(blo), sig(bhi), FRAC_PI_2, 1.5 * PI],
                resolution: [ns, 2 * nt],
            });
        }
        let mut r_in = 0.0;
        if let (Some(et), Some([nlo, nhi])) = (params.eps_tilde, l.neck_band) {
            let s = |r: f64| (r / et).acosh();
            regions.push(RegionSpec {
                kind: RegionKind::NeckCatenoid,
                chart: ChartId::Neck,
                rect: [-s(nlo), s(nlo), 0.0, 2.0 * PI],
                resolution: [nr, 2 * params.n * na],
            });
            regions.push(RegionSpec {
                kind: RegionKind::NeckGluing,
                chart: ChartId::Neck,
                rect: [s(nlo), s(nhi), 0.0, 2.0 * PI],
                resolution: [nr, 2 * params.n * na],
            });
            r_in = nhi;
        }
        regions.push(RegionSpec {
            kind: RegionKind::Graph,
            chart: ChartId::Disk,
            rect: [r_in, 1.0, 0.0, 2.0 * PI],
            resolution: [nr, 2 * params.n * na],
        });
        Ok(SurfaceAtlas { base, resolution, regions, symmetry: SymmetryGroup::new(params.n), radial, bridge })
    }

    pub fn params(&self) -> &MatchingParams {
        &self.base.params
    }

    pub fn layout(&self) -> &ChartLayout {
        &self.base.layout
    }

    /// Polar-grid node covered by the bridge chart.
    pub fn is_hole(&self, i: usize, j: usize) -> bool {
        let z = self.radial.z(i, j);
        let zeta = (z - 1.0) / (z + 1.0);
        2.0 * zeta.norm() < self.layout().rho_hole
    }

    /// Geometry at a polar-grid node, with jets in the grid coordinates.
    pub fn radial_node(&self, i: usize, j: usize) -> Result<NodeGeometry> {
        let u = self.radial.radial_param(i);
        let phi = Jet::var_v(self.radial.angle(j));
        match self.params().genus {
            Genus::Zero => {
                let mut z = CJet::polar(u, phi);
                if i == self.radial.nr - 1 {
                    let zc = Complex64::from_polar(1.0, phi.v);
                    z.v = zc;
                }
                self.base.disk_node(z)
            }
            Genus::One => self.base.neck_node(u, phi),
        }
    }

    pub fn bridge_node(&self, i: usize, j: usize) -> Result<NodeGeometry> {
        let sigma = Jet::var_u(self.bridge.sigma(i));
        let theta = Jet::var_v(self.bridge.theta(j));
        let mut g = self.base.bridge_node(sigma, theta)?;
        g.c.v = self.bridge.zeta(i, j);
        Ok(g)
    }

    /// Most specific region claiming a disk point of the fundamental sector.
    pub fn region_at(&self, z: Complex64) -> Result<RegionKind> {
        Ok(self.base.regions_at(z)?.first().copied().unwrap_or(RegionKind::Graph))
    }

    /// Geometry at an arbitrary upper-sheet disk point, in the chart the solver uses there.
    pub fn disk_point(&self, z: Complex64) -> Result<NodeGeometry> {
        match (self.params().genus, self.params().eps_tilde) {
            (Genus::One, Some(et)) => {
                let s = (z.norm() / et).max(1.0).acosh();
                self.base.neck_node(Jet::constant(s), Jet::constant(z.arg()))
            }
            _ => self.base.disk_node(CJet::constant(z)),
        }
    }
}

/// Normal graph `w` over the approximate surface, sampled on both solver grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    pub radial: Vec<f64>,
    pub bridge: Vec<f64>,
}

impl PerturbationField {
    pub fn zeros(atlas: &SurfaceAtlas) -> Self {
        PerturbationField { radial: vec![0.0; atlas.radial.len()], bridge: vec![0.0; atlas.bridge.len()] }
    }

    pub fn from_fn(atlas: &SurfaceAtlas, f: impl Fn(Complex64) -> f64) -> Self {
        let r = &atlas.radial;
        let b = &atlas.bridge;
        let radial = (0..r.len()).map(|k| f(r.z(k / r.na, k % r.na))).collect();
        let bridge = (0..b.len())
            .map(|k| {
                let zeta = b.zeta(k / (b.nt + 1), k % (b.nt + 1));
                f((1.0 + zeta) / (1.0 - zeta))
            })
            .collect();
        PerturbationField { radial, bridge }
    }

    /// `w` at a disk point of the fundamental sector, read from the chart covering it.
    pub fn value_at(&self, atlas: &SurfaceAtlas, z: Complex64) -> f64 {
        let zeta = (z - 1.0) / (z + 1.0);
        if 2.0 * zeta.norm() < 0.5 * (atlas.layout().rho_hole + atlas.layout().rho_bridge) {
            let (x, y) = atlas.bridge.locate(zeta);
            interp_eval(&interp_weights(&atlas.bridge, x, y), &self.bridge)
        } else {
            let (x, y) = atlas.radial.locate(z);
            interp_eval(&interp_weights(&atlas.radial, x, y), &self.radial)
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.radial.iter().chain(&self.bridge).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sheet of a sample. Lower-sheet samples are mirror images `x3 ↦ −x3` of
/// upper-sheet ones, with normal `−Fν` so that each sheet's normal points up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Upper,
    Lower,
}

/// A point of the perturbed surface at a solver node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceSample {
    pub chart: ChartId,
    pub node: usize,
    pub z: [f64; 2],
    pub region: RegionKind,
    pub sheet: Sheet,
    pub position: [f64; 3],
    pub normal: [f64; 3],
    pub mean_curvature: f64,
}

impl SurfaceSample {
    /// Image under the vertical flip.
    pub fn mirrored(&self) -> SurfaceSample {
        let [x, y, z] = self.position;
        let [a, b, c] = self.normal;
        SurfaceSample {
            sheet: match self.sheet {
                Sheet::Upper => Sheet::Lower,
                Sheet::Lower => Sheet::Upper,
            },
            position: [x, y, -z],
            normal: [-a, -b, c],
            mean_curvature: -self.mean_curvature,
            ..self.clone()
        }
    }
}

/// Smallness windows: `|w| ≤ ε̃ cosh s` on the neck, `|w| ≤ ε cosh σ` on the bridge, `|w| ≤ 1` elsewhere.
pub fn check_smallness(atlas: &SurfaceAtlas, w: &PerturbationField) -> Result<()> {
    if w.radial.len() != atlas.radial.len() || w.bridge.len() != atlas.bridge.len() {
        return Err(FbmsError::InvalidField("perturbation does not match the atlas grids".into()));
    }
    if let Some(k) = w.radial.iter().chain(&w.bridge).position(|v| !v.is_finite()) {
        return Err(FbmsError::InvalidField(format!("non-finite perturbation value at {k}")));
    }
    let p = atlas.params();
    for (k, &v) in w.bridge.iter().enumerate() {
        let sigma = atlas.bridge.sigma(k / (atlas.bridge.nt + 1));
        if v.abs() > p.eps * sigma.cosh() {
            return Err(FbmsError::InvalidField(format!(
                "bridge window |w| ≤ ε cosh σ violated at σ = {sigma:.3}: |w| = {:.3e}",
                v.abs()
            )));
        }
    }
    for (k, &v) in w.radial.iter().enumerate() {
        let r = atlas.radial.radius(k / atlas.radial.na);
        let bound = match p.eps_tilde {
            Some(et) if r < 0.5 => r.max(et),
            _ => 1.0,
        };
        if v.abs() > bound {
            return Err(FbmsError::InvalidField(format!(
                "window |w| ≤ {bound:.3e} violated at r = {r:.3e}: |w| = {:.3e}",
                v.abs()
            )));
        }
    }
    Ok(())
}

/// Perturbed surface sampled at the active nodes of both grids, upper sheet
/// first, followed by the mirrored lower sheet in the same order.
///
/// `w` is stored as the upper-sheet displacement; with the sheet-wise upward
/// normals the lower-sheet displacement is `−w`.
pub fn perturb_surface(atlas: &SurfaceAtlas, w: &PerturbationField) -> Result<Vec<SurfaceSample>> {
    check_smallness(atlas, w)?;
    let mut out = Vec::new();
    let r = &atlas.radial;
    for i in 0..r.nr {
        for j in 0..r.na {
            if atlas.is_hole(i, j) {
                continue;
            }
            let k = r.idx(i, j);
            let g = atlas.radial_node(i, j)?;
            let f = g.forms(fd_jet(r, &w.radial, i, j))?;
            let z = r.z(i, j);
            out.push(SurfaceSample {
                chart: ChartId::Disk,
                node: k,
                z: [z.re, z.im],
                region: atlas.region_at(z)?,
                sheet: Sheet::Upper,
                position: g.position(w.radial[k]),
                normal: f.normal,
                mean_curvature: f.mean,
            });
        }
    }
    let b = &atlas.bridge;
    for i in 0..b.ns - 1 {
        for j in 0..=b.nt {
            let k = b.idx(i, j);
            let g = atlas.bridge_node(i, j)?;
            let f = g.forms(fd_jet(b, &w.bridge, i, j))?;
            let zeta = b.zeta(i, j);
            let z = (1.0 + zeta) / (1.0 - zeta);
            out.push(SurfaceSample {
                chart: ChartId::Bridge(0),
                node: k,
                z: [z.re, z.im],
                region: region_from_radius(
                    2.0 * zeta.norm(),
                    atlas.layout().bridge_band,
                    RegionKind::BridgeCatenoid,
                    RegionKind::BridgeGluing,
                ),
                sheet: Sheet::Upper,
                position: g.position(w.bridge[k]),
                normal: f.normal,
                mean_curvature: f.mean,
            });
        }
    }
    let lower: Vec<_> = out.iter().map(SurfaceSample::mirrored).collect();
    out.extend(lower);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mesh

#[derive(Clone, Copy, Debug, PartialEq)]
enum VertexSource {
    Bridge { sigma: f64, theta: f64 },
    Neck { s: f64, phi: f64 },
    Disk(Complex64),
}

/// Triangulation of the upper sheet over the fundamental sector.
#[derive(Clone, Debug)]
struct FundamentalMesh {
    sources: Vec<VertexSource>,
    tris: Vec<[usize; 3]>,
    regions: Vec<RegionKind>,
}

fn bridge_zeta(eps: f64, sigma: f64, theta: f64) -> Complex64 {
    let r = 0.5 * eps * sigma.cosh();
    if theta == FRAC_PI_2 {
        Complex64::new(0.0, r)
    } else if theta == PI {
        Complex64::new(-r, 0.0)
    } else {
        Complex64::from_polar(r, theta)
    }
}

fn source_z(src: VertexSource, p: &MatchingParams) -> Complex64 {
    match src {
        VertexSource::Bridge { sigma, theta } => {
            let zeta = bridge_zeta(p.eps, sigma, theta);
            (1.0 + zeta) / (1.0 - zeta)
        }
        VertexSource::Neck { s, phi } => {
            let r = p.eps_tilde_or_zero() * s.cosh();
            if phi == 0.0 {
                Complex64::new(r, 0.0)
            } else {
                Complex64::from_polar(r, phi)
            }
        }
        VertexSource::Disk(z) => z,
    }
}

/// Points strictly between `a` and `b` with spacing `min(h, κ r)` (or `h` from the origin).
fn graded_points(a: f64, b: f64, h: f64, kappa: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = a;
    loop {
        let step = if a == 0.0 { h } else { h.min(kappa * r) };
        r += step;
        if r >= b - 0.5 * step {
            break;
        }
        out.push(r);
    }
    out
}

fn structured_patch(
    fm: &mut FundamentalMesh,
    ni: usize,
    nj: usize,
    source: impl Fn(usize, usize) -> VertexSource,
    region: impl Fn(f64) -> RegionKind,
    centre: impl Fn(usize) -> f64,
) -> Vec<Vec<usize>> {
    let mut ids = vec![vec![0usize; nj + 1]; ni + 1];
    for (i, row) in ids.iter_mut().enumerate() {
        for (j, id) in row.iter_mut().enumerate() {
            *id = fm.sources.len();
            fm.sources.push(source(i, j));
        }
    }
    for i in 0..ni {
        let kind = region(centre(i));
        for j in 0..nj {
            let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
            fm.tris.push([a, b, c]);
            fm.tris.push([a, c, d]);
            fm.regions.push(kind);
            fm.regions.push(kind);
        }
    }
    ids
}

fn fundamental_mesh(base: &BaseSurface, res: &Resolution) -> Result<FundamentalMesh> {
    use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
    let p = &base.params;
    let l = &base.layout;
    let n = p.n;
    let sector = PI / n as f64;
    let cells = res.mesh_angle_cells();
    let dlog = res.mesh_log_step();
    let h = sector / cells as f64;
    let mut fm = FundamentalMesh { sources: Vec::new(), tris: Vec::new(), regions: Vec::new() };

    // bridge patch at z = 1
    let sigma_m = (l.rho_mesh / p.eps).acosh();
    let ns = ((sigma_m / dlog).ceil() as usize).max(4);
    let dt = FRAC_PI_2 / cells as f64;
    let sig = |i: usize| if i == ns { sigma_m } else { sigma_m * i as f64 / ns as f64 };
    let th = |j: usize| if j == cells { PI } else { FRAC_PI_2 + j as f64 * dt };
    let bids = structured_patch(
        &mut fm,
        ns,
        cells,
        |i, j| VertexSource::Bridge { sigma: sig(i), theta: th(j) },
        |rho| region_from_radius(rho, l.bridge_band, RegionKind::BridgeCatenoid, RegionKind::BridgeGluing),
        |i| p.eps * (0.5 * (sig(i) + sig(i + 1))).cosh(),
    );

    // neck patch
    let neck_ids = match (p.eps_tilde, l.r_mesh, l.neck_band) {
        (Some(et), Some(rm), Some(band)) => {
            let s_m = (rm / et).acosh();
            let nn = ((s_m / dlog).ceil() as usize).max(4);
            let sv = move |i: usize| if i == nn { s_m } else { s_m * i as f64 / nn as f64 };
            let ph = move |j: usize| if j == cells { sector } else { j as f64 * h };
            let ids = structured_patch(
                &mut fm,
                nn,
                cells,
                |i, j| VertexSource::Neck { s: sv(i), phi: ph(j) },
                |r| region_from_radius(r, band, RegionKind::NeckCatenoid, RegionKind::NeckGluing),
                |i| et * (0.5 * (sv(i) + sv(i + 1))).cosh(),
            );
            Some((ids, nn))
        }
        _ => None,
    };

    // boundary polygon of the triangulated part, counter-clockwise
    let mut poly: Vec<usize> = Vec::new();
    let push_disk = |fm: &mut FundamentalMesh, poly: &mut Vec<usize>, z: Complex64| {
        poly.push(fm.sources.len());
        fm.sources.push(VertexSource::Disk(z));
    };
    let p1 = source_z(fm.sources[bids[ns][cells]], p).re;
    let r_start = match &neck_ids {
        Some((ids, nn)) => {
            poly.push(ids[*nn][0]);
            source_z(fm.sources[ids[*nn][0]], p).re
        }
        None => {
            push_disk(&mut fm, &mut poly, Complex64::new(0.0, 0.0));
            0.0
        }
    };
    for r in graded_points(r_start, p1, h, h) {
        push_disk(&mut fm, &mut poly, Complex64::new(r, 0.0));
    }
    for j in (0..=cells).rev() {
        poly.push(bids[ns][j]);
    }
    let phi2 = source_z(fm.sources[bids[ns][0]], p).arg();
    let na = ((sector - phi2) / h).ceil().max(2.0) as usize;
    for k in 1..=na {
        let phi = phi2 + (sector - phi2) * k as f64 / na as f64;
        push_disk(&mut fm, &mut poly, Complex64::from_polar(1.0, if k == na { sector } else { phi }));
    }
    let rot = Complex64::from_polar(1.0, sector);
    let mut ray = graded_points(r_start, 1.0, h, h);
    ray.reverse();
    for r in ray {
        push_disk(&mut fm, &mut poly, rot * r);
    }
    if let Some((ids, nn)) = &neck_ids {
        for j in (1..=cells).rev() {
            poly.push(ids[*nn][j]);
        }
    }

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handle_to_id: HashMap<usize, usize> = HashMap::new();
    let mut handles = Vec::with_capacity(poly.len());
    for &id in &poly {
        let z = source_z(fm.sources[id], p);
        let hd = cdt
            .insert(Point2::new(z.re, z.im))
            .map_err(|e| FbmsError::InvalidParameter(format!("triangulation insert: {e:?}")))?;
        handle_to_id.insert(hd.index(), id);
        handles.push(hd);
    }
    for k in 0..handles.len() {
        cdt.add_constraint(handles[k], handles[(k + 1) % handles.len()]);
    }
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .keep_constraint_edges()
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .with_max_allowed_area(0.5 * h * h)
        .with_max_additional_vertices(500_000);
    let result = cdt.refine(params);
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
    for v in cdt.vertices() {
        let idx = v.fix().index();
        if let std::collections::hash_map::Entry::Vacant(e) = handle_to_id.entry(idx) {
            let pos = v.position();
            e.insert(fm.sources.len());
            fm.sources.push(VertexSource::Disk(Complex64::new(pos.x, pos.y)));
        }
    }
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let vs = f.vertices();
        fm.tris.push([
            handle_to_id[&vs[0].fix().index()],
            handle_to_id[&vs[1].fix().index()],
            handle_to_id[&vs[2].fix().index()],
        ]);
        fm.regions.push(RegionKind::Graph);
    }
    Ok(fm)
}

/// Triangle mesh of the full surface.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub positions: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<RegionKind>,
    /// Leading triangles forming one fundamental domain, or 0 if unknown.
    pub fundamental_faces: usize,
}

/// Counts and boundary structure of a mesh.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MeshTopology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
    pub boundary_vertices: usize,
    pub nonmanifold_edges: usize,
}

/// Spatial hash that identifies positions closer than `tol`.
struct Welder {
    cell: f64,
    tol: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
    pos: Vec<[f64; 3]>,
}

impl Welder {
    fn new(cell: f64, tol: f64) -> Self {
        Welder { cell, tol, map: HashMap::new(), pos: Vec::new() }
    }

    fn key(&self, p: [f64; 3]) -> [i64; 3] {
        [
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
            (p[2] / self.cell).floor() as i64,
        ]
    }

    fn nearest(&self, p: [f64; 3]) -> Option<(usize, f64)> {
        let k = self.key(p);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &id in list {
                            let q = self.pos[id];
                            let d = norm3([p[0] - q[0], p[1] - q[1], p[2] - q[2]]);
                            if best.is_none_or(|(_, bd)| d < bd) {
                                best = Some((id, d));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    fn insert(&mut self, p: [f64; 3]) -> usize {
        if let Some((id, d)) = self.nearest(p) {
            if d <= self.tol {
                return id;
            }
        }
        let id = self.pos.len();
        self.pos.push(p);
        let k = self.key(p);
        self.map.entry(k).or_default().push(id);
        id
    }
}

/// Distance below which replicated vertices are identified.
pub const WELD_TOLERANCE: f64 = 1e-11;

fn assemble_orbit(fund_pos: &[[f64; 3]], fm: &FundamentalMesh, group: &SymmetryGroup) -> TriangleMesh {
    let mut welder = Welder::new(1e-9, WELD_TOLERANCE);
    let mut triangles = Vec::with_capacity(fm.tris.len() * group.order);
    let mut regions = Vec::with_capacity(triangles.capacity());
    for g in group.elements() {
        let ids: Vec<usize> = fund_pos.iter().map(|&p| welder.insert(group.apply(g, p))).collect();
        let reversed = g.1 ^ g.2;
        for (t, &kind) in fm.tris.iter().zip(&fm.regions) {
            let tri = [ids[t[0]], ids[t[1]], ids[t[2]]];
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                continue;
            }
            triangles.push(if reversed { [tri[0], tri[2], tri[1]] } else { tri });
            regions.push(kind);
        }
    }
    let positions = welder.pos;
    let mut normals = vec![[0.0; 3]; positions.len()];
    for t in &triangles {
        let (a, b, c) = (positions[t[0]], positions[t[1]], positions[t[2]]);
        let nf = cross3(sub3(b, a), sub3(c, a));
        for &v in t {
            for k in 0..3 {
                normals[v][k] += nf[k];
            }
        }
    }
    for nv in normals.iter_mut() {
        let l = norm3(*nv);
        if l > 0.0 {
            *nv = [nv[0] / l, nv[1] / l, nv[2] / l];
        }
    }
    let fundamental_faces = fm.tris.len();
    TriangleMesh { positions, normals, triangles, regions, fundamental_faces }
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl TriangleMesh {
    fn edge_faces(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (f, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        map
    }

    pub fn topology(&self) -> MeshTopology {
        let ef = self.edge_faces();
        let mut parent: Vec<usize> = (0..self.positions.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut bverts = HashSet::new();
        let mut nonmanifold = 0;
        for (&(a, b), fs) in &ef {
            if fs.len() == 1 {
                bverts.insert(a);
                bverts.insert(b);
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            } else if fs.len() > 2 {
                nonmanifold += 1;
            }
        }
        let roots: HashSet<usize> = bverts.iter().map(|&v| find(&mut parent, v)).collect();
        let (v, e, f) = (self.positions.len(), ef.len(), self.triangles.len());
        MeshTopology {
            vertices: v,
            edges: e,
            faces: f,
            euler_characteristic: v as i64 - e as i64 + f as i64,
            boundary_loops: roots.len(),
            boundary_vertices: bverts.len(),
            nonmanifold_edges: nonmanifold,
        }
    }

    fn boundary_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<(usize, usize, usize)> = self
            .edge_faces()
            .into_iter()
            .filter(|(_, fs)| fs.len() == 1)
            .map(|((a, b), fs)| {
                let t = self.triangles[fs[0]];
                let c = t.iter().copied().find(|&v| v != a && v != b).unwrap_or(a);
                (a, b, c)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// `max ||P| − 1|` over boundary vertices.
    pub fn boundary_sphere_defect(&self) -> f64 {
        self.boundary_edges()
            .iter()
            .flat_map(|&(a, b, _)| [a, b])
            .map(|v| (norm3(self.positions[v]) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max (1 − |cos∠(T, N)|)` over boundary edges, with `T` the inward edge direction
    /// orthogonal to the boundary edge and `N` the sphere normal.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b, c) in self.boundary_edges() {
            let (pa, pb, pc) = (self.positions[a], self.positions[b], self.positions[c]);
            let e = sub3(pb, pa);
            let le = norm3(e);
            for (base, tip) in [(pa, pc), (pb, pc)] {
                let t = sub3(tip, base);
                let k = dot3(t, e) / (le * le);
                let tp = [t[0] - k * e[0], t[1] - k * e[1], t[2] - k * e[2]];
                let c = dot3(tp, base).abs() / (norm3(tp) * norm3(base));
                worst = worst.max(1.0 - c);
            }
        }
        worst
    }

    /// Largest distance from the image of a vertex under a generator to the nearest vertex.
    pub fn symmetry_defect(&self, group: &SymmetryGroup) -> f64 {
        let mut welder = Welder::new(1e-6, 0.0);
        for &p in &self.positions {
            let id = welder.pos.len();
            welder.pos.push(p);
            let k = welder.key(p);
            welder.map.entry(k).or_default().push(id);
        }
        let gens = [(1usize % group.n, false, false), (0, true, false), (0, false, true)];
        let mut worst: f64 = 0.0;
        for g in gens {
            for &p in &self.positions {
                let d = welder.nearest(group.apply(g, p)).map_or(f64::INFINITY, |(_, d)| d);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Number of intersecting pairs of triangles that share no vertex.
    ///
    /// Only pairs involving one of the first `fundamental_faces` triangles are
    /// tested; by symmetry every intersection has such a representative.
    pub fn self_intersections(&self) -> usize {
        let boxes: Vec<[f64; 6]> = self
            .triangles
            .iter()
            .map(|t| {
                let mut b = [f64::INFINITY, f64::INFINITY, f64::INFINITY, -f64::INFINITY, -f64::INFINITY, -f64::INFINITY];
                for &v in t {
                    for k in 0..3 {
                        b[k] = b[k].min(self.positions[v][k]);
                        b[k + 3] = b[k + 3].max(self.positions[v][k]);
                    }
                }
                b
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        let queries = if self.fundamental_faces == 0 { self.triangles.len() } else { self.fundamental_faces };
        let mut hits = HashSet::new();
        let mut stack = Vec::new();
        for a in 0..queries {
            let ta = self.triangles[a];
            let pa = ta.map(|v| self.positions[v]);
            bvh.query(&boxes[a], &mut stack, |b| {
                if b == a || hits.contains(&(a.min(b), a.max(b))) {
                    return;
                }
                let tb = self.triangles[b];
                if ta.iter().any(|v| tb.contains(v)) {
                    return;
                }
                if triangles_intersect(&pa, &tb.map(|v| self.positions[v])) {
                    hits.insert((a.min(b), a.max(b)));
                }
            });
        }
        hits.len()
    }

    /// Wavefront OBJ with one object per region kind.
    pub fn write_obj<W: Write>(&self, out: &mut W, header: &str) -> std::io::Result<()> {
        writeln!(out, "# {header}")?;
        for p in &self.positions {
            writeln!(out, "v {:.12e} {:.12e} {:.12e}", p[0], p[1], p[2])?;
        }
        for nv in &self.normals {
            writeln!(out, "vn {:.9e} {:.9e} {:.9e}", nv[0], nv[1], nv[2])?;
        }
        let kinds = [
            RegionKind::Graph,
            RegionKind::NeckGluing,
            RegionKind::BridgeGluing,
            RegionKind::NeckCatenoid,
            RegionKind::BridgeCatenoid,
        ];
        for kind in kinds {
            if !self.regions.contains(&kind) {
                continue;
            }
            writeln!(out, "o {}", kind.obj_name())?;
            for (t, _) in self.triangles.iter().zip(&self.regions).filter(|(_, &r)| r == kind) {
                writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}", a = t[0] + 1, b = t[1] + 1, c = t[2] + 1)?;
            }
        }
        Ok(())
    }
}

fn segment_hits_triangle(p: [f64; 3], q: [f64; 3], t: &[[f64; 3]; 3]) -> bool {
    let n = cross3(sub3(t[1], t[0]), sub3(t[2], t[0]));
    let nn = dot3(n, n);
    if nn == 0.0 {
        return false;
    }
    let dp = dot3(n, sub3(p, t[0]));
    let dq = dot3(n, sub3(q, t[0]));
    let scale = nn.sqrt() * norm3(sub3(q, p));
    if dp * dq >= 0.0 || (dp - dq).abs() <= 1e-12 * scale {
        return false;
    }
    let s = dp / (dp - dq);
    if s <= 1e-9 || s >= 1.0 - 1e-9 {
        return false;
    }
    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]), p[2] + s * (q[2] - p[2])];
    let tol = 1e-9 * nn;
    (0..3).all(|k| {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        dot3(cross3(sub3(b, a), sub3(x, a)), n) > tol
    })
}

fn boxes_overlap(a: &[f64; 6], b: &[f64; 6]) -> bool {
    (0..3).all(|k| a[k] <= b[k + 3] && b[k] <= a[k + 3])
}

/// Bounding volume hierarchy over axis-aligned boxes, split at the median centroid.
struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

struct BvhNode {
    bb: [f64; 6],
    /// Leaf range into `order`, or children when `count == 0`.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

impl Bvh {
    const LEAF: usize = 8;

    fn build(boxes: &[[f64; 6]]) -> Self {
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..boxes.len()).collect() };
        if !boxes.is_empty() {
            bvh.build_node(boxes, 0, boxes.len());
        }
        bvh
    }

    fn build_node(&mut self, boxes: &[[f64; 6]], start: usize, end: usize) -> usize {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::INFINITY, -f64::INFINITY, -f64::INFINITY, -f64::INFINITY];
        for &t in &self.order[start..end] {
            for k in 0..3 {
                bb[k] = bb[k].min(boxes[t][k]);
                bb[k + 3] = bb[k + 3].max(boxes[t][k + 3]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode { bb, start, count: end - start, left: 0, right: 0 });
        if end - start <= Self::LEAF {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (bb[a + 3] - bb[a]).total_cmp(&(bb[b + 3] - bb[b])))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        let key = |t: &usize| boxes[*t][axis] + boxes[*t][axis + 3];
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| key(a).total_cmp(&key(b)));
        let left = self.build_node(boxes, start, mid);
        let right = self.build_node(boxes, mid, end);
        let node = &mut self.nodes[id];
        node.count = 0;
        node.left = left;
        node.right = right;
        id
    }

    fn query(&self, bb: &[f64; 6], stack: &mut Vec<usize>, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        stack.clear();
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !boxes_overlap(&node.bb, bb) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    visit(t);
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
    }
}

/// Transversal intersection test for two triangles.
pub fn triangles_intersect(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> bool {
    (0..3).any(|k| segment_hits_triangle(a[k], a[(k + 1) % 3], b))
        || (0..3).any(|k| segment_hits_triangle(b[k], b[(k + 1) % 3], a))
}

/// Summary of mesh diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshReport {
    pub topology: MeshTopology,
    pub expected_euler_characteristic: i64,
    pub expected_boundary_loops: usize,
    pub boundary_sphere_defect: f64,
    pub orthogonality_defect: f64,
    pub symmetry_defect: f64,
    pub height_equivariance_defect: f64,
    pub self_intersections: usize,
}

/// Expected `(χ, boundary loops)`: `χ = 2 − n − 2g` with `n` boundary curves.
pub fn expected_topology(n: usize, genus: Genus) -> (i64, usize) {
    (2 - n as i64 - 2 * genus.as_int() as i64, n)
}

/// Surface mesh with its atlas and diagnostics.
#[derive(Clone, Debug)]
pub struct BuiltSurface {
    pub atlas: SurfaceAtlas,
    pub mesh: TriangleMesh,
    pub report: MeshReport,
}

/// Positions of the fundamental vertices for a perturbation `w` (or the base surface).
fn fundamental_positions(atlas: &SurfaceAtlas, fm: &FundamentalMesh, w: Option<&PerturbationField>) -> Result<Vec<[f64; 3]>> {
    let p = atlas.params();
    fm.sources
        .iter()
        .map(|&src| {
            let z = source_z(src, p);
            let wv = w.map_or(0.0, |f| f.value_at(atlas, z));
            let geo = match src {
                VertexSource::Bridge { sigma, theta } => {
                    let mut g = atlas.base.bridge_node(Jet::constant(sigma), Jet::constant(theta))?;
                    g.c.v = bridge_zeta(p.eps, sigma, theta);
                    g
                }
                VertexSource::Neck { s, phi } => {
                    let mut g = atlas.base.neck_node(Jet::constant(s), Jet::constant(phi))?;
                    g.c.v = z;
                    g
                }
                VertexSource::Disk(z) => {
                    let mut g = atlas.disk_point(z)?;
                    g.c.v = z;
                    g
                }
            };
            let pos = geo.position(wv);
            if pos.iter().any(|c| !c.is_finite()) {
                return Err(FbmsError::InvalidField(format!("non-finite vertex at z = {z}")));
            }
            Ok(pos)
        })
        .collect()
}

/// `max |x3(gz) − x3(z)|` over sample points and generators of the height function.
pub fn height_equivariance_defect(base: &BaseSurface, samples: usize) -> Result<f64> {
    let n = base.params.n;
    let sector = PI / n as f64;
    let l = &base.layout;
    let r_lo = l.r_mesh.unwrap_or(0.05);
    let mut worst: f64 = 0.0;
    let omega = root_of_unity(1, n);
    let mut state: u64 = 0x9e3779b97f4a7c15;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut k = 0;
    while k < samples {
        let r = r_lo + (0.999 - r_lo) * next();
        let z = Complex64::from_polar(r, sector * next());
        if base.bridge_radius(z)? < l.bridge_band[0] * 1.01 + 2.0 * base.params.eps {
            continue;
        }
        k += 1;
        let h0 = base.height(&CJet::constant(z))?.v;
        for g in [z * omega, z.conj(), z.conj() * omega] {
            worst = worst.max((base.height(&CJet::constant(g))?.v - h0).abs());
        }
    }
    Ok(worst)
}

/// Build the approximate surface mesh, or its perturbation by `w`.
pub fn build_mesh(atlas: &SurfaceAtlas, w: Option<&PerturbationField>) -> Result<TriangleMesh> {
    if let Some(w) = w {
        check_smallness(atlas, w)?;
    }
    let fm = fundamental_mesh(&atlas.base, &atlas.resolution)?;
    let pos = fundamental_positions(atlas, &fm, w)?;
    Ok(assemble_orbit(&pos, &fm, &atlas.symmetry))
}

/// Diagnostics of a mesh of the construction.
pub fn mesh_report(atlas: &SurfaceAtlas, mesh: &TriangleMesh) -> Result<MeshReport> {
    let (chi, loops) = expected_topology(atlas.params().n, atlas.params().genus);
    Ok(MeshReport {
        topology: mesh.topology(),
        expected_euler_characteristic: chi,
        expected_boundary_loops: loops,
        boundary_sphere_defect: mesh.boundary_sphere_defect(),
        orthogonality_defect: mesh.orthogonality_defect(),
        symmetry_defect: mesh.symmetry_defect(&atlas.symmetry),
        height_equivariance_defect: height_equivariance_defect(&atlas.base, 64)?,
        self_intersections: mesh.self_intersections(),
    })
}

/// Atlas, mesh and diagnostics of the approximate surface for `(n, genus)`.
pub fn build_surface(n: usize, genus: Genus, resolution: Resolution) -> Result<BuiltSurface> {
    let atlas = SurfaceAtlas::new(n, genus, resolution)?;
    let mesh = build_mesh(&atlas, None)?;
    let report = mesh_report(&atlas, &mesh)?;
    Ok(BuiltSurface { atlas, mesh, report })
}

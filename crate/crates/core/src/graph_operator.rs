//! Vertical graphs `x3 = u(z)` over the horizontal disk in the `(z, x3)` chart.
//!
//! Fields live on a polar grid: radii `r_i = (i + ½)Δr` with `Δr = 1/(N_r − ½)`,
//! so the last ring sits on `|z| = 1` and no node touches the origin. Angles are
//! uniform over one period `2π/fold`. Angular derivatives are spectral; radial
//! derivatives are centered second order, one-sided on the boundary ring. At the
//! innermost ring the missing neighbour is supplied per Fourier mode by the parity
//! `û_ℓ(−r) = (−1)^ℓ û_ℓ(r)`.
//!
//! Mean curvature of the graph (sum of principal curvatures, upward normal):
//!
//! ```text
//! H(u) = div(A²B² ∇u / W) / (A³ B) + 2 W sinh u,   W = √(1 + B²|∇u|²)
//! ```
//!
//! with flat divergence and gradient. Its linearization at zero is `Δ(B v)`.

use crate::ball_geometry::{calx_jet, cosh_m1, eval_a, eval_b};
use crate::error::{FbmsError, Result};
use crate::jet::{CJet, Jet};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Symmetries a field is declared to have.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DiskSymmetry {
    /// `u(z̄) = u(z)`.
    pub conjugation: bool,
    /// Invariance under rotation by `2π/k`; `k` must be a multiple of the grid fold.
    pub rotation: Option<usize>,
    /// The field is one sheet of a pair `(u, −u)` exchanged by the vertical flip.
    pub odd_pairing: bool,
}

/// Samples of a real function on the polar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskField {
    nr: usize,
    nphi: usize,
    fold: usize,
    values: Vec<f64>,
    pub symmetry: DiskSymmetry,
}

/// Polar derivatives of a field, each stored like [`DiskField`] values.
#[derive(Clone, Debug)]
pub struct PolarDerivatives {
    pub u: Vec<f64>,
    pub ur: Vec<f64>,
    pub uphi: Vec<f64>,
    pub urr: Vec<f64>,
    pub urphi: Vec<f64>,
    pub uphiphi: Vec<f64>,
}

impl DiskField {
    /// Zero field; needs `N_r ≥ 4` and an even `N_φ ≥ 4`.
    pub fn zeros(nr: usize, nphi: usize, fold: usize) -> Result<Self> {
        if nr < 4 || nphi < 4 || nphi % 2 != 0 || fold == 0 {
            return Err(FbmsError::InvalidParameter(format!(
                "disk grid N_r={nr}, N_phi={nphi}, fold={fold}"
            )));
        }
        Ok(DiskField { nr, nphi, fold, values: vec![0.0; nr * nphi], symmetry: DiskSymmetry::default() })
    }

    /// Sample `f(x1, x2)` at the grid nodes.
    pub fn from_fn(nr: usize, nphi: usize, fold: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut d = DiskField::zeros(nr, nphi, fold)?;
        for i in 0..nr {
            for j in 0..nphi {
                let z = d.node(i, j);
                d.values[i * nphi + j] = f(z.re, z.im);
            }
        }
        Ok(d)
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(FbmsError::InvalidField(format!(
                "{} values for a grid of {}",
                values.len(),
                self.values.len()
            )));
        }
        Ok(DiskField { values, ..self.clone() })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn fold(&self) -> usize {
        self.fold
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dr(&self) -> f64 {
        1.0 / (self.nr as f64 - 0.5)
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / (self.fold * self.nphi) as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.dphi()
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.radius(i), self.angle(j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nphi + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DiskField {
        DiskField { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index shift realizing rotation by `2π/k`, if the grid resolves it.
    fn rotation_shift(&self, k: usize) -> Result<usize> {
        if k % self.fold != 0 || self.nphi % (k / self.fold) != 0 {
            return Err(FbmsError::InvalidParameter(format!(
                "rotation by 2π/{k} not resolved by fold {} with {} angles",
                self.fold, self.nphi
            )));
        }
        Ok(self.nphi / (k / self.fold))
    }

    /// `u ∘ ρ` for the rotation `ρ(z) = e^{2πi/k} z`.
    pub fn rotated(&self, k: usize) -> Result<DiskField> {
        let s = self.rotation_shift(k)?;
        let np = self.nphi;
        let mut out = self.clone();
        for i in 0..self.nr {
            for j in 0..np {
                out.values[i * np + j] = self.values[i * np + (j + s) % np];
            }
        }
        Ok(out)
    }

    /// `u ∘ conj`.
    pub fn conjugated(&self) -> DiskField {
        let np = self.nphi;
        let mut out = self.clone();
        for i in 0..self.nr {
            for j in 0..np {
                out.values[i * np + j] = self.values[i * np + (np - j) % np];
            }
        }
        out
    }

    /// Average over the declared symmetry group.
    pub fn symmetrize(&self) -> Result<DiskField> {
        let mut out = self.clone();
        if let Some(k) = self.symmetry.rotation {
            let s = self.rotation_shift(k)?;
            let orbit = self.nphi / s;
            let mut acc = vec![0.0; self.values.len()];
            let mut cur = out.clone();
            for _ in 0..orbit {
                for (a, v) in acc.iter_mut().zip(&cur.values) {
                    *a += v;
                }
                cur = cur.rotated(k)?;
            }
            out.values = acc.into_iter().map(|a| a / orbit as f64).collect();
        }
        if self.symmetry.conjugation {
            let c = out.conjugated();
            for (a, b) in out.values.iter_mut().zip(&c.values) {
                *a = 0.5 * (*a + b);
            }
        }
        Ok(out)
    }

    /// Largest violation of the declared symmetries.
    pub fn symmetry_defect(&self) -> Result<f64> {
        let mut d: f64 = 0.0;
        let diff = |a: &DiskField, b: &DiskField| {
            a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        if let Some(k) = self.symmetry.rotation {
            d = d.max(diff(self, &self.rotated(k)?));
        }
        if self.symmetry.conjugation {
            d = d.max(diff(self, &self.conjugated()));
        }
        Ok(d)
    }

    /// Angular wavenumber of FFT bin `m`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        let np = self.nphi;
        let k = if m <= np / 2 { m as i64 } else { m as i64 - np as i64 };
        k * self.fold as i64
    }

    /// Normalized angular Fourier coefficients of every ring: `u = Σ_m c_m e^{iℓ_m φ}`.
    pub fn spectrum(&self) -> Vec<Vec<Complex64>> {
        let np = self.nphi;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(np);
        let scale = 1.0 / np as f64;
        (0..self.nr)
            .map(|i| {
                let mut row: Vec<Complex64> =
                    self.values[i * np..(i + 1) * np].iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fwd.process(&mut row);
                row.iter_mut().for_each(|c| *c *= scale);
                row
            })
            .collect()
    }

    /// Same grid, values synthesized from ring spectra (real parts kept).
    pub fn from_spectrum(&self, spec: &[Vec<Complex64>]) -> DiskField {
        let np = self.nphi;
        let mut planner = FftPlanner::<f64>::new();
        let inv = planner.plan_fft_inverse(np);
        let mut vals = Vec::with_capacity(self.values.len());
        for row in spec {
            let mut buf = row.clone();
            inv.process(&mut buf);
            vals.extend(buf.iter().map(|c| c.re));
        }
        DiskField { values: vals, ..self.clone() }
    }

    /// Polar derivatives of the samples.
    pub fn derivatives(&self) -> PolarDerivatives {
        let (nr, np) = (self.nr, self.nphi);
        let dr = self.dr();
        let spec = self.spectrum();
        let wavenumber = |m: usize| self.wavenumber(m);
        let mut planner = FftPlanner::<f64>::new();
        let inv = planner.plan_fft_inverse(np);

        let mut d_r = vec![vec![Complex64::new(0.0, 0.0); np]; nr];
        let mut d_rr = d_r.clone();
        let mut g = vec![Complex64::new(0.0, 0.0); nr];
        for m in 0..np {
            let l = wavenumber(m);
            // Low odd modes lose an order at the first ring unless the r^ℓ factor is
            // split off, so those modes are differentiated as r^ℓ g(r) with g even.
            let split = l.unsigned_abs() <= 4;
            let (pw, parity) = if split {
                (l.unsigned_abs() as i32, 1.0)
            } else {
                (0, if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 })
            };
            for i in 0..nr {
                g[i] = spec[i][m] / self.radius(i).powi(pw);
            }
            for i in 0..nr {
                let c = g[i];
                let (g1, g2) = if i + 1 == nr {
                    let (a, b, e) = (g[i - 1], g[i - 2], g[i - 3]);
                    (
                        (3.0 * c - 4.0 * a + b) / (2.0 * dr),
                        (2.0 * c - 5.0 * a + 4.0 * b - e) / (dr * dr),
                    )
                } else {
                    let lo = if i == 0 { g[0] * parity } else { g[i - 1] };
                    let hi = g[i + 1];
                    ((hi - lo) / (2.0 * dr), (hi - 2.0 * c + lo) / (dr * dr))
                };
                if pw == 0 {
                    d_r[i][m] = g1;
                    d_rr[i][m] = g2;
                } else {
                    let r = self.radius(i);
                    let p = pw as f64;
                    let rp = r.powi(pw);
                    d_r[i][m] = c * (p * rp / r) + g1 * rp;
                    d_rr[i][m] = c * (p * (p - 1.0) * rp / (r * r)) + g1 * (2.0 * p * rp / r) + g2 * rp;
                }
            }
        }

        let mut out = PolarDerivatives {
            u: self.values.clone(),
            ur: vec![0.0; nr * np],
            uphi: vec![0.0; nr * np],
            urr: vec![0.0; nr * np],
            urphi: vec![0.0; nr * np],
            uphiphi: vec![0.0; nr * np],
        };
        let nyq = np / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); np];
        let mut back = |src: &dyn Fn(usize) -> Complex64, dst: &mut [f64]| {
            for (m, b) in buf.iter_mut().enumerate() {
                *b = src(m);
            }
            inv.process(&mut buf);
            for (d, b) in dst.iter_mut().zip(buf.iter()) {
                *d = b.re;
            }
        };
        for i in 0..nr {
            let sl = i * np..(i + 1) * np;
            let ik = |m: usize| {
                if m == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, wavenumber(m) as f64)
                }
            };
            let kk = |m: usize| -((wavenumber(m) as f64).powi(2));
            back(&|m| d_r[i][m], &mut out.ur[sl.clone()]);
            back(&|m| d_rr[i][m], &mut out.urr[sl.clone()]);
            back(&|m| spec[i][m] * ik(m), &mut out.uphi[sl.clone()]);
            back(&|m| d_r[i][m] * ik(m), &mut out.urphi[sl.clone()]);
            back(&|m| spec[i][m] * kk(m), &mut out.uphiphi[sl]);
        }
        out
    }

    /// Cartesian jets `(u, u_x, u_y, u_xx, u_xy, u_yy)` at every node.
    pub fn cartesian_jets(&self) -> Vec<Jet> {
        let d = self.derivatives();
        let np = self.nphi;
        (0..self.values.len())
            .map(|k| {
                let (i, j) = (k / np, k % np);
                let r = self.radius(i);
                let (s, c) = self.angle(j).sin_cos();
                let ux = c * d.ur[k] - s * d.uphi[k] / r;
                let uy = s * d.ur[k] + c * d.uphi[k] / r;
                let hrr = d.urr[k];
                let hrt = (d.urphi[k] - d.uphi[k] / r) / r;
                let htt = d.uphiphi[k] / (r * r) + d.ur[k] / r;
                Jet::new(
                    d.u[k],
                    ux,
                    uy,
                    c * c * hrr - 2.0 * c * s * hrt + s * s * htt,
                    c * s * (hrr - htt) + (c * c - s * s) * hrt,
                    s * s * hrr + 2.0 * c * s * hrt + c * c * htt,
                )
            })
            .collect()
    }

    /// Flat Laplacian of the samples.
    pub fn laplacian(&self) -> DiskField {
        let d = self.derivatives();
        let np = self.nphi;
        let vals = (0..self.values.len())
            .map(|k| {
                let r = self.radius(k / np);
                d.urr[k] + d.ur[k] / r + d.uphiphi[k] / (r * r)
            })
            .collect();
        DiskField { values: vals, ..self.clone() }
    }

    /// Quadrature weights over one period (cell areas of the radial finite volumes).
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let dr = self.dr();
        let dphi = self.dphi();
        let mut w = Vec::with_capacity(self.values.len());
        for i in 0..self.nr {
            let lo = (i as f64) * dr;
            let hi = if i + 1 == self.nr { 1.0 } else { (i as f64 + 1.0) * dr };
            let cell = 0.5 * (hi * hi - lo * lo) * dphi;
            w.extend(std::iter::repeat(cell).take(self.nphi));
        }
        w
    }

    /// `∫∫ u dx` over the whole disk.
    pub fn integrate(&self) -> f64 {
        self.fold as f64
            * self.quadrature_weights().iter().zip(&self.values).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn check_c1(u: &DiskField, jets: &[Jet]) -> Result<()> {
    for (k, jt) in jets.iter().enumerate() {
        if !jt.v.is_finite() || !jt.du.is_finite() || !jt.dv.is_finite() {
            return Err(FbmsError::InvalidField(format!("non-finite sample at node {k}")));
        }
    }
    let sup_u = u.sup_norm();
    let sup_g = jets.iter().fold(0.0f64, |m, j| m.max(j.du.hypot(j.dv)));
    if sup_u > 1.0 || sup_g > 1.0 {
        return Err(FbmsError::InvalidField(format!(
            "C¹ bound exceeded: sup|u| = {sup_u:.3e}, sup|∇u| = {sup_g:.3e}"
        )));
    }
    Ok(())
}

/// Mean curvature of the graph at a point from the Cartesian jet of `u`.
pub fn graph_mean_curvature_at(z: Complex64, u: Jet) -> f64 {
    let (x, y) = (z.re, z.im);
    let b = eval_b(z);
    let a = eval_a(z, u.v);
    let cm = cosh_m1(u.v);
    let sh = u.v.sinh();
    let p2 = u.du * u.du + u.dv * u.dv;
    let w = (1.0 + b * b * p2).sqrt();
    let f = a * a * b * b;
    let ax = -a * a * (x * cm + b * sh * u.du);
    let ay = -a * a * (y * cm + b * sh * u.dv);
    let fx = 2.0 * a * b * b * ax + 2.0 * a * a * b * x;
    let fy = 2.0 * a * b * b * ay + 2.0 * a * a * b * y;
    let wx = (b * x * p2 + b * b * (u.du * u.duu + u.dv * u.duv)) / w;
    let wy = (b * y * p2 + b * b * (u.du * u.duv + u.dv * u.dvv)) / w;
    let gx = fx / w - f * wx / (w * w);
    let gy = fy / w - f * wy / (w * w);
    let div = f / w * (u.duu + u.dvv) + gx * u.du + gy * u.dv;
    div / (a * a * a * b) + 2.0 * w * sh
}

/// `H(u)` at every node.
pub fn mean_curvature_graph(u: &DiskField) -> Result<DiskField> {
    let jets = u.cartesian_jets();
    check_c1(u, &jets)?;
    let np = u.nphi;
    let vals = jets
        .iter()
        .enumerate()
        .map(|(k, &jt)| graph_mean_curvature_at(u.node(k / np, k % np), jt))
        .collect();
    Ok(DiskField { values: vals, ..u.clone() })
}

/// `Δ(B v)` expanded as `B Δv + 2 z·∇v + 2 v`, sharing stencils with [`mean_curvature_graph`].
pub fn linearized_graph_operator(v: &DiskField) -> DiskField {
    let jets = v.cartesian_jets();
    let np = v.nphi;
    let vals = jets
        .iter()
        .enumerate()
        .map(|(k, jt)| {
            let z = v.node(k / np, k % np);
            eval_b(z) * (jt.duu + jt.dvv) + 2.0 * (z.re * jt.du + z.im * jt.dv) + 2.0 * jt.v
        })
        .collect();
    DiskField { values: vals, ..v.clone() }
}

/// `∫∫ A²(u) √(1 + B²|∇u|²) dx` over the disk.
pub fn area_functional(u: &DiskField) -> Result<f64> {
    let jets = u.cartesian_jets();
    check_c1(u, &jets)?;
    let np = u.nphi;
    let w = u.quadrature_weights();
    let s: f64 = jets
        .iter()
        .enumerate()
        .map(|(k, jt)| {
            let z = u.node(k / np, k % np);
            let a = eval_a(z, jt.v);
            let b = eval_b(z);
            w[k] * a * a * (1.0 + b * b * (jt.du * jt.du + jt.dv * jt.dv)).sqrt()
        })
        .sum();
    Ok(u.fold as f64 * s)
}

/// Upward unit normal `(−B∇u + ∂x3/B)/(A W)` in chart components at node `(i, j)`.
pub fn unit_normal_graph(u: &DiskField, i: usize, j: usize) -> Result<[f64; 3]> {
    if i >= u.nr || j >= u.nphi {
        return Err(FbmsError::OutOfChart(format!("node ({i}, {j})")));
    }
    let jt = u.cartesian_jets()[i * u.nphi + j];
    Ok(unit_normal_at(u.node(i, j), jt))
}

/// Normal from a Cartesian jet.
pub fn unit_normal_at(z: Complex64, u: Jet) -> [f64; 3] {
    let a = eval_a(z, u.v);
    let b = eval_b(z);
    let w = (1.0 + b * b * (u.du * u.du + u.dv * u.dv)).sqrt();
    let k = 1.0 / (a * w);
    [-k * b * u.du, -k * b * u.dv, k / b]
}

/// Norm of a chart vector in the metric `A²(|dz|² + B² dx3²)`.
pub fn chart_metric_norm(z: Complex64, x3: f64, v: [f64; 3]) -> f64 {
    let a = eval_a(z, x3);
    let b = eval_b(z);
    a * (v[0] * v[0] + v[1] * v[1] + b * b * v[2] * v[2]).sqrt()
}

/// `max (1 − |⟨T, N⟩|/(|T||N|))` over pairs of boundary tangent `T` and sphere normal `N`.
pub fn orthogonality_defect(samples: &[([f64; 3], [f64; 3])]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (k, (t, n)) in samples.iter().enumerate() {
        let nt = norm3(*t);
        let nn = norm3(*n);
        if nt <= 1e-300 || nn <= 1e-300 || !nt.is_finite() {
            return Err(FbmsError::InvalidField(format!("degenerate tangent or normal at sample {k}")));
        }
        let c = dot3(*t, *n).abs() / (nt * nn);
        worst = worst.max((1.0 - c).max(0.0));
    }
    Ok(worst)
}

impl DiskField {
    /// Radial tangents of the embedded graph on `|z| = 1`, paired with the boundary point.
    pub fn boundary_samples(&self) -> Vec<([f64; 3], [f64; 3])> {
        let d = self.derivatives();
        let i = self.nr - 1;
        (0..self.nphi)
            .map(|j| {
                let k = i * self.nphi + j;
                let phi = self.angle(j);
                let z = CJet::polar(Jet::var_u(1.0), Jet::constant(phi));
                let x3 = Jet::new(d.u[k], d.ur[k], 0.0, d.urr[k], 0.0, 0.0);
                let p = calx_jet(&z, x3);
                ([p[0].du, p[1].du, p[2].du], [p[0].v, p[1].v, p[2].v])
            })
            .collect()
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

//! Structured grids of the overset discretization.
//!
//! Both grids live on the symmetry-reduced upper sheet. The polar grid covers
//! the sector `0 ≤ φ ≤ π/n` of the disk; for genus one its radial coordinate
//! is graded in the catenoid variable `s` with `|z| = ε̃ cosh s`. The bridge grid
//! covers the quarter `θ ∈ [π/2, π]` of the half-catenoid chart at `z = 1`.
//! Reflection symmetries and the boundary conditions are realized by ghost
//! index maps.

use crate::error::{FbmsError, Result};
use crate::jet::Jet;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

/// Radial coordinate of the polar grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialMap {
    /// Cell-centred `r_i = (i + ½)Δr` with the last node on `|z| = 1`.
    Uniform { dr: f64 },
    /// Node-centred `q_i = i Δq`, with `q(s) = (s + ε̃(cosh s − 1)/r_c)/Q` and `|z| = ε̃ cosh s`.
    Catenoid { eps_tilde: f64, r_c: f64, q_scale: f64, s_max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub n: usize,
    pub nr: usize,
    pub na: usize,
    pub map: RadialMap,
}

/// Grading length of the genus-one radial coordinate.
pub const GRADING_RADIUS: f64 = 0.1;

impl RadialGrid {
    pub fn new(n: usize, eps_tilde: Option<f64>, nr: usize, na: usize) -> Result<Self> {
        if nr < 6 || na < 2 {
            return Err(FbmsError::InvalidParameter(format!("polar grid {nr}x{na} too small")));
        }
        let map = match eps_tilde {
            None => RadialMap::Uniform { dr: 1.0 / (nr as f64 - 0.5) },
            Some(et) => {
                if !(et > 0.0 && et < 0.5) {
                    return Err(FbmsError::InvalidParameter(format!("ε̃ = {et}")));
                }
                let s_max = (1.0 / et).acosh();
                let r_c = GRADING_RADIUS;
                let q_scale = s_max + et * (s_max.cosh() - 1.0) / r_c;
                RadialMap::Catenoid { eps_tilde: et, r_c, q_scale, s_max }
            }
        };
        Ok(RadialGrid { n, nr, na, map })
    }

    pub fn len(&self) -> usize {
        self.nr * self.na
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.na + j
    }

    pub fn hu(&self) -> f64 {
        match self.map {
            RadialMap::Uniform { dr } => dr,
            RadialMap::Catenoid { .. } => 1.0 / (self.nr as f64 - 1.0),
        }
    }

    pub fn hv(&self) -> f64 {
        PI / (self.n * self.na) as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hv()
    }

    /// `s(q)` with its first two derivatives.
    fn s_of_q(&self, q: f64) -> [f64; 3] {
        let RadialMap::Catenoid { eps_tilde: et, r_c, q_scale, s_max } = self.map else {
            unreachable!()
        };
        let qf = |s: f64| (s + et * (s.cosh() - 1.0) / r_c) / q_scale;
        let (mut lo, mut hi) = (0.0, s_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if qf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * (1.0 + hi) {
                break;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = (1.0 + et * s.sinh() / r_c) / q_scale;
            s -= (qf(s) - q) / d;
        }
        let q1 = (1.0 + et * s.sinh() / r_c) / q_scale;
        let q2 = et * s.cosh() / (r_c * q_scale);
        [s, 1.0 / q1, -q2 / (q1 * q1 * q1)]
    }

    /// Radial parameter at ring `i` as a jet in `(u, v)`: `r` for genus zero, `s` for genus one.
    pub fn radial_param(&self, i: usize) -> Jet {
        match self.map {
            RadialMap::Uniform { dr } => Jet::var_u((i as f64 + 0.5) * dr),
            RadialMap::Catenoid { .. } => {
                let q = Jet::var_u(i as f64 * self.hu());
                let [s, s1, s2] = self.s_of_q(q.v);
                if i == self.nr - 1 {
                    if let RadialMap::Catenoid { s_max, .. } = self.map {
                        return q.lift(s_max, s1, s2);
                    }
                }
                q.lift(s, s1, s2)
            }
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        match self.map {
            RadialMap::Uniform { dr } => {
                if i == self.nr - 1 {
                    1.0
                } else {
                    (i as f64 + 0.5) * dr
                }
            }
            RadialMap::Catenoid { eps_tilde, .. } => {
                if i == self.nr - 1 {
                    1.0
                } else {
                    eps_tilde * self.radial_param(i).v.cosh()
                }
            }
        }
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(self.radius(i), self.angle(j))
    }

    /// Node index for a possibly out-of-range `(i, j)`.
    pub fn resolve(&self, i: isize, j: isize) -> usize {
        let (nr, na) = (self.nr as isize, self.na as isize);
        let (mut i, mut j) = (i, j);
        if i < 0 {
            match self.map {
                RadialMap::Uniform { .. } => {
                    i = -1 - i;
                    j += self.n as isize * na;
                }
                RadialMap::Catenoid { .. } => i = -i,
            }
        }
        if i >= nr {
            i = 2 * (nr - 1) - i;
        }
        let i = i.clamp(0, nr - 1);
        let mut jj = j.rem_euclid(2 * na);
        if jj >= na {
            jj = 2 * na - 1 - jj;
        }
        (i * na + jj) as usize
    }

    /// Fractional index coordinates of a disk point.
    pub fn locate(&self, z: Complex64) -> (f64, f64) {
        let r = z.norm();
        let x = match self.map {
            RadialMap::Uniform { dr } => r / dr - 0.5,
            RadialMap::Catenoid { eps_tilde: et, r_c, q_scale, .. } => {
                let s = (r / et).max(1.0).acosh();
                (s + et * (s.cosh() - 1.0) / r_c) / q_scale / self.hu()
            }
        };
        (x, z.arg() / self.hv() - 0.5)
    }
}

/// Grid of the bridge chart at `z = 1`: `ζ = (ε/2) cosh σ e^{iθ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgeGrid {
    pub n: usize,
    pub eps: f64,
    /// Rings `σ_i = i Δσ`, `i < ns`; the last ring is a fringe.
    pub ns: usize,
    /// Angular cells; nodes `θ_j = π/2 + j Δθ`, `j ≤ nt`.
    pub nt: usize,
    pub sigma_max: f64,
}

impl BridgeGrid {
    pub fn new(n: usize, eps: f64, rho_max: f64, ns: usize, nt: usize) -> Result<Self> {
        if ns < 6 || nt < 2 {
            return Err(FbmsError::InvalidParameter(format!("bridge grid {ns}x{nt} too small")));
        }
        if rho_max <= eps {
            return Err(FbmsError::InvalidParameter(format!("bridge radius {rho_max} ≤ ε = {eps}")));
        }
        Ok(BridgeGrid { n, eps, ns, nt, sigma_max: (rho_max / eps).acosh() })
    }

    pub fn len(&self) -> usize {
        self.ns * (self.nt + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.nt + 1) + j
    }

    pub fn hu(&self) -> f64 {
        self.sigma_max / (self.ns as f64 - 1.0)
    }

    pub fn hv(&self) -> f64 {
        FRAC_PI_2 / self.nt as f64
    }

    pub fn sigma(&self, i: usize) -> f64 {
        if i == self.ns - 1 {
            self.sigma_max
        } else {
            i as f64 * self.hu()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        if j == self.nt {
            PI
        } else {
            FRAC_PI_2 + j as f64 * self.hv()
        }
    }

    pub fn zeta(&self, i: usize, j: usize) -> Complex64 {
        let r = 0.5 * self.eps * self.sigma(i).cosh();
        match j {
            0 => Complex64::new(0.0, r),
            _ if j == self.nt => Complex64::new(-r, 0.0),
            _ => Complex64::from_polar(r, self.theta(j)),
        }
    }

    pub fn resolve(&self, i: isize, j: isize) -> usize {
        let (ns, nt) = (self.ns as isize, self.nt as isize);
        let mut i = i.abs();
        if i >= ns {
            i = 2 * (ns - 1) - i;
        }
        let i = i.clamp(0, ns - 1);
        let mut jj = j.rem_euclid(2 * nt);
        if jj > nt {
            jj = 2 * nt - jj;
        }
        (i * (nt + 1) + jj) as usize
    }

    /// Fractional index coordinates of a half-plane point `ζ`.
    pub fn locate(&self, zeta: Complex64) -> (f64, f64) {
        let sigma = (2.0 * zeta.norm() / self.eps).max(1.0).acosh();
        let mut theta = zeta.arg();
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        (sigma / self.hu(), (theta - FRAC_PI_2) / self.hv())
    }
}

/// Index map shared by both grids.
pub trait GhostMap {
    fn node(&self, i: isize, j: isize) -> usize;
    fn steps(&self) -> (f64, f64);
}

impl GhostMap for RadialGrid {
    fn node(&self, i: isize, j: isize) -> usize {
        self.resolve(i, j)
    }
    fn steps(&self) -> (f64, f64) {
        (self.hu(), self.hv())
    }
}

impl GhostMap for BridgeGrid {
    fn node(&self, i: isize, j: isize) -> usize {
        self.resolve(i, j)
    }
    fn steps(&self) -> (f64, f64) {
        (self.hu(), self.hv())
    }
}

/// Central difference weights of the six jet components on the 3×3 stencil,
/// indexed `[component][di + 1][dj + 1]`.
pub fn stencil_weights(hu: f64, hv: f64) -> [[[f64; 3]; 3]; 6] {
    let mut s = [[[0.0; 3]; 3]; 6];
    s[0][1][1] = 1.0;
    s[1][2][1] = 0.5 / hu;
    s[1][0][1] = -0.5 / hu;
    s[2][1][2] = 0.5 / hv;
    s[2][1][0] = -0.5 / hv;
    s[3][2][1] = 1.0 / (hu * hu);
    s[3][0][1] = 1.0 / (hu * hu);
    s[3][1][1] = -2.0 / (hu * hu);
    let c = 0.25 / (hu * hv);
    s[4][2][2] = c;
    s[4][0][0] = c;
    s[4][2][0] = -c;
    s[4][0][2] = -c;
    s[5][1][2] = 1.0 / (hv * hv);
    s[5][1][0] = 1.0 / (hv * hv);
    s[5][1][1] = -2.0 / (hv * hv);
    s
}

/// Finite-difference jet of a nodal field at `(i, j)`.
pub fn fd_jet<G: GhostMap>(g: &G, values: &[f64], i: usize, j: usize) -> Jet {
    let (hu, hv) = g.steps();
    let st = stencil_weights(hu, hv);
    let mut out = [0.0; 6];
    for di in 0..3 {
        for dj in 0..3 {
            let k = g.node(i as isize + di as isize - 1, j as isize + dj as isize - 1);
            let w = values[k];
            for (c, o) in out.iter_mut().enumerate() {
                *o += st[c][di][dj] * w;
            }
        }
    }
    Jet::from_array(out)
}

fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Bicubic Lagrange weights at fractional index `(x, y)`, merged per node.
pub fn interp_weights<G: GhostMap>(g: &G, x: f64, y: f64) -> Vec<(usize, f64)> {
    let (i0, j0) = (x.floor(), y.floor());
    let (wx, wy) = (lagrange4(x - i0), lagrange4(y - j0));
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(16);
    for (a, wa) in wx.iter().enumerate() {
        for (b, wb) in wy.iter().enumerate() {
            let k = g.node(i0 as isize + a as isize - 1, j0 as isize + b as isize - 1);
            match out.iter_mut().find(|(kk, _)| *kk == k) {
                Some(e) => e.1 += wa * wb,
                None => out.push((k, wa * wb)),
            }
        }
    }
    out
}

pub fn interp_eval(weights: &[(usize, f64)], values: &[f64]) -> f64 {
    weights.iter().map(|&(k, w)| w * values[k]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genus_one_map_round_trip() {
        let g = RadialGrid::new(12, Some(1.7e-4), 40, 6).unwrap();
        for i in [0, 5, 20, 39] {
            let z = g.z(i, 2);
            let (x, y) = g.locate(z);
            assert!((x - i as f64).abs() < 1e-9, "{i}: {x}");
            assert!((y - 2.0).abs() < 1e-9);
        }
        let s = g.radial_param(7);
        let h = 1e-5;
        let sp = g.s_of_q(7.0 * g.hu() + h)[0];
        let sm = g.s_of_q(7.0 * g.hu() - h)[0];
        assert!((s.du - (sp - sm) / (2.0 * h)).abs() < 1e-6 * s.du.abs());
    }

    #[test]
    fn ghosts_reflect() {
        let g = RadialGrid::new(6, None, 10, 4).unwrap();
        assert_eq!(g.resolve(0, -1), g.idx(0, 0));
        assert_eq!(g.resolve(3, 4), g.idx(3, 3));
        assert_eq!(g.resolve(10, 1), g.idx(8, 1));
        // through the origin the angle shifts by π = 6·4 cells, i.e. 3 periods
        assert_eq!(g.resolve(-1, 1), g.idx(0, 1));
        let b = BridgeGrid::new(6, 1e-3, 0.2, 10, 4).unwrap();
        assert_eq!(b.resolve(-2, 1), b.idx(2, 1));
        assert_eq!(b.resolve(1, -1), b.idx(1, 1));
        assert_eq!(b.resolve(1, 5), b.idx(1, 3));
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let b = BridgeGrid::new(6, 1e-3, 0.2, 20, 8).unwrap();
        let f = |i: f64, j: f64| 1.0 + i - 0.3 * i * i * i + 0.1 * j * j * i;
        let vals: Vec<f64> = (0..b.len()).map(|k| f((k / 9) as f64, (k % 9) as f64)).collect();
        let w = interp_weights(&b, 7.3, 3.6);
        assert!((interp_eval(&w, &vals) - f(7.3, 3.6)).abs() < 1e-10);
    }
}

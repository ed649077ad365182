//! Linear problems: the Robin Laplacian on the disk with singular weights and
//! deficiency constants, and the catenoid Jacobi operator solved mode by mode.
//!
//! Robin problem: `ΔW = F` in the disk, `∂_r W − W/n = 0` on the circle. The
//! solution is split as `W = Ψ + n c₀* + c₁* χ` with `Ψ(0) = Ψ(1) = 0`.
//!
//! Jacobi operator: `L = ∂²_σ + ∂²_θ + 2 sech²σ`. On the Fourier mode `e^{ijθ}`
//! it becomes `w'' + (2 sech²σ − j²) w`; its kernel on mode 0 is spanned by
//! `σ tanh σ − 1` and `tanh σ`, on mode 1 by `sech σ`.

use crate::cutoff::step_down;
use crate::error::{FbmsError, Result};
use crate::graph_operator::DiskField;
use crate::green_functions::gauss_legendre;
use crate::jet::Jet;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

/// Weight function of a weighted norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightChoice {
    /// `|z| Π_m |z − z_m|`.
    Full,
    /// `Π_m |z − z_m|`.
    Boundary,
    /// `|z|`.
    Puncture,
    /// `|z − z_m|`.
    Root(usize),
    /// `(cosh σ)^δ` on a cylinder, with `σ = Re p`.
    Cosh { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNormSpec {
    pub nu: f64,
    pub alpha: f64,
    pub weight: WeightChoice,
}

impl WeightedNormSpec {
    pub fn new(nu: f64, alpha: f64, weight: WeightChoice) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(FbmsError::InvalidParameter(format!("nu = {nu} not in (0, 1)")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(FbmsError::InvalidParameter(format!("alpha = {alpha} not in (0, 1)")));
        }
        if let WeightChoice::Cosh { delta } = weight {
            check_delta(delta)?;
        }
        Ok(WeightedNormSpec { nu, alpha, weight })
    }
}

/// Value of the chosen weight.
pub fn weight_gamma(z: Complex64, n: usize, choice: WeightChoice) -> f64 {
    let roots = || {
        (1..=n)
            .map(|m| (z - crate::ball_geometry::root_of_unity(m, n)).norm())
            .product::<f64>()
    };
    match choice {
        WeightChoice::Full => z.norm() * roots(),
        WeightChoice::Boundary => roots(),
        WeightChoice::Puncture => z.norm(),
        WeightChoice::Root(m) => (z - crate::ball_geometry::root_of_unity(m, n)).norm(),
        WeightChoice::Cosh { delta } => z.re.cosh().powf(delta),
    }
}

/// Terms of a discrete weighted norm.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNorm {
    /// `sup γ^{−ν+i} |∇ⁱu|` for `i = 0..=order`.
    pub terms: Vec<f64>,
    /// Sampled-pair Hölder quotient of the top-order term.
    pub holder: f64,
    pub total: f64,
    /// Samples dropped because they sit on the singular set.
    pub excluded: usize,
}

const SINGULAR_FLOOR: f64 = 1e-12;

/// Weighted norm of samples given as jets at points (`p = z`, or `p = σ + iθ` for the cosh weight).
pub fn weighted_norm_samples(
    points: &[Complex64],
    jets: &[Jet],
    spec: &WeightedNormSpec,
    n: usize,
    order: usize,
) -> Result<WeightedNorm> {
    if order > 2 || points.len() != jets.len() || points.is_empty() {
        return Err(FbmsError::InvalidParameter(format!(
            "weighted norm of order {order} on {} points / {} jets",
            points.len(),
            jets.len()
        )));
    }
    let level = |jt: &Jet, i: usize| match i {
        0 => jt.v.abs(),
        1 => jt.du.hypot(jt.dv),
        _ => (jt.duu * jt.duu + 2.0 * jt.duv * jt.duv + jt.dvv * jt.dvv).sqrt(),
    };
    let factor = |g: f64, i: f64| match spec.weight {
        WeightChoice::Cosh { .. } => 1.0 / g,
        _ => g.powf(-spec.nu + i),
    };
    let mut terms = vec![0.0f64; order + 1];
    let mut kept = Vec::with_capacity(points.len());
    let mut excluded = 0;
    for (p, jt) in points.iter().zip(jets) {
        let g = weight_gamma(*p, n, spec.weight);
        if !(g > SINGULAR_FLOOR) || !g.is_finite() || !jt.v.is_finite() {
            excluded += 1;
            continue;
        }
        for (i, t) in terms.iter_mut().enumerate() {
            *t = t.max(factor(g, i as f64) * level(jt, i));
        }
        kept.push((*p, factor(g, order as f64 + spec.alpha) * level(jt, order)));
    }
    let holder = holder_pairs(&kept, spec.alpha);
    let total = terms.iter().sum::<f64>() + holder;
    Ok(WeightedNorm { terms, holder, total, excluded })
}

/// Largest `|q(p) − q(p')|/|p − p'|^α` over pairs at six dyadic separations.
fn holder_pairs(samples: &[(Complex64, f64)], alpha: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let diam = samples.iter().fold(0.0f64, |m, (p, _)| m.max((p - samples[0].0).norm())) * 2.0;
    let stride = (samples.len() / 64).max(1);
    let mut best: f64 = 0.0;
    for a in samples.iter().step_by(stride) {
        for k in 1..=6 {
            let target = diam * 0.5f64.powi(k);
            let mut pick: Option<&(Complex64, f64)> = None;
            let mut miss = f64::INFINITY;
            for b in samples {
                let d = (b.0 - a.0).norm();
                if d > 0.0 && (d - target).abs() < miss {
                    miss = (d - target).abs();
                    pick = Some(b);
                }
            }
            if let Some(b) = pick {
                let d = (b.0 - a.0).norm();
                if d > 0.5 * target && d < 2.0 * target {
                    best = best.max((a.1 - b.1).abs() / d.powf(alpha));
                }
            }
        }
    }
    best
}

/// Weighted norm of a disk field.
pub fn weighted_norm(field: &DiskField, spec: &WeightedNormSpec, n: usize, order: usize) -> Result<WeightedNorm> {
    let np = field.nphi();
    let pts: Vec<Complex64> = (0..field.values().len()).map(|k| field.node(k / np, k % np)).collect();
    weighted_norm_samples(&pts, &field.cartesian_jets(), spec, n, order)
}

/// Solution of a Robin problem split into its regular part and deficiency constants.
#[derive(Clone, Debug)]
pub struct DeficiencyDecomposition {
    pub regular: DiskField,
    pub c0_star: f64,
    pub c1_star: Option<f64>,
    pub d0_star: Option<f64>,
    pub d1_star: Option<f64>,
    /// Largest residual of the discrete equations or boundary condition.
    pub residual: f64,
    /// `‖Ψ‖ / ‖F‖` in the weighted sup norms, when measured.
    pub norm_ratio: Option<f64>,
}

fn gl16() -> &'static [(f64, f64)] {
    static Q: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    Q.get_or_init(|| gauss_legendre(16))
}

fn gl_panel(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    gl16().iter().map(|(x, w)| w * g(c + h * x)).sum::<f64>() * h
}

/// `∫_0^s g` on dyadic panels, with a power-law model for the innermost piece.
fn integrate_from_zero(g: &dyn Fn(f64) -> f64, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    const LEVELS: i32 = 60;
    let mut total = 0.0;
    for k in 0..LEVELS {
        let hi = s * 0.5f64.powi(k);
        total += gl_panel(g, 0.5 * hi, hi);
    }
    let a = s * 0.5f64.powi(LEVELS);
    let (ga, gh) = (g(a), g(0.5 * a));
    if !ga.is_finite() || !gh.is_finite() {
        return Err(FbmsError::NotConverged(format!("integrand not finite near 0 (at {a:e})")));
    }
    if ga != 0.0 && gh != 0.0 {
        let p = (ga.abs() / gh.abs()).log2();
        if p <= -1.0 + 1e-9 {
            return Err(FbmsError::NotConverged(format!(
                "integrand ~ t^{p:.3} is not integrable at 0"
            )));
        }
        total += a * ga / (p + 1.0);
    }
    if !total.is_finite() {
        return Err(FbmsError::NotConverged("radial quadrature overflow".into()));
    }
    Ok(total)
}

/// `Ψ₀(r) = ∫_0^r (1/s) ∫_0^s t F(t) dt ds` and `Ψ₀'(r)`.
pub fn radial_psi0(f: &dyn Fn(f64) -> f64, r: f64) -> Result<(f64, f64)> {
    let inner = |s: f64| integrate_from_zero(&|t: f64| t * f(t), s);
    let failure = std::cell::RefCell::new(None);
    let outer = |s: f64| match inner(s) {
        Ok(v) => v / s,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let psi = integrate_from_zero(&outer, r);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((psi?, inner(r)? / r))
}

/// Radial Robin problem; `c₀* = Ψ₀'(1) − Ψ₀(1)/n` makes `W = Ψ₀ + n c₀*` satisfy the Robin condition.
pub fn solve_robin_radial(f: &dyn Fn(f64) -> f64, n: usize) -> Result<DeficiencyDecomposition> {
    if n < 2 {
        return Err(FbmsError::InvalidParameter(format!("n = {n} < 2")));
    }
    let nf = n as f64;
    let (p1, d1) = radial_psi0(f, 1.0)?;
    let c0 = d1 - p1 / nf;
    let w1 = p1 + nf * c0;
    let residual = (d1 - w1 / nf).abs();
    let grid = DiskField::zeros(33, 4, 1)?;
    let mut vals = Vec::with_capacity(33 * 4);
    for i in 0..33 {
        let v = radial_psi0(f, grid.radius(i))?.0;
        vals.extend([v; 4]);
    }
    Ok(DeficiencyDecomposition {
        regular: grid.with_values(vals)?,
        c0_star: c0,
        c1_star: None,
        d0_star: None,
        d1_star: None,
        residual,
        norm_ratio: None,
    })
}

/// Cutoff near `z = 1`: equal to 1 for `|z − 5/4| ≤ 1/2`, 0 for `|z − 5/4| ≥ 3/4`.
pub fn robin_chi(z: Complex64) -> f64 {
    step_down((z - Complex64::new(1.25, 0.0)).norm(), 0.5, 0.75)[0]
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [Complex64]) -> Result<()> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    if beta == 0.0 {
        return Err(FbmsError::Linear("zero pivot in tridiagonal solve".into()));
    }
    d[0] /= beta;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i - 1];
        if beta.abs() < 1e-300 {
            return Err(FbmsError::Linear("zero pivot in tridiagonal solve".into()));
        }
        d[i] = (d[i] - d[i - 1] * a[i]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - d[i + 1] * cp[i];
    }
    Ok(())
}

/// Robin problem on the disk for a field even in angle.
///
/// Each angular mode is solved with the conservative three-point radial scheme;
/// fields sampled with fold `n` are solved on the reduced sector directly.
pub fn solve_robin_disk(f: &DiskField, n: usize, spec: &WeightedNormSpec) -> Result<DeficiencyDecomposition> {
    solve_robin_disk_with(f, n, 1.0 / n as f64, spec)
}

/// [`solve_robin_disk`] with the boundary condition `∂_r W − κ W = 0`.
///
/// `κ = 1/n` is the reduced problem; `κ = 1` is the condition met by `B w`
/// when `∂_r w = 0`.
pub fn solve_robin_disk_with(f: &DiskField, n: usize, kappa: f64, spec: &WeightedNormSpec) -> Result<DeficiencyDecomposition> {
    if n < 2 {
        return Err(FbmsError::InvalidParameter(format!("n = {n} < 2")));
    }
    let sanitized = f.map(|v| if v.is_finite() { v } else { 0.0 });
    let sup = sanitized.sup_norm();
    let conj = sanitized.conjugated();
    let odd = sanitized.values().iter().zip(conj.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if odd > 1e-9 * (1.0 + sup) {
        return Err(FbmsError::InvalidField(format!(
            "right-hand side is not even in angle (defect {odd:.2e})"
        )));
    }
    let (nr, np) = (f.nr(), f.nphi());
    let h = f.dr();
    let nf = n as f64;
    let spec_f = sanitized.spectrum();
    let mut sol = vec![vec![Complex64::new(0.0, 0.0); np]; nr];
    let mut worst_res: f64 = 0.0;
    for m in 0..np {
        let l2 = (f.wavenumber(m) as f64).powi(2);
        let mut a = vec![0.0; nr];
        let mut b = vec![0.0; nr];
        let mut c = vec![0.0; nr];
        let mut d: Vec<Complex64> = (0..nr).map(|i| spec_f[i][m]).collect();
        for i in 0..nr - 1 {
            let r = f.radius(i);
            let lo = (r - 0.5 * h).max(0.0);
            let hi = r + 0.5 * h;
            a[i] = lo / (r * h * h);
            c[i] = hi / (r * h * h);
            b[i] = -(a[i] + c[i]) - l2 / (r * r);
        }
        // Robin row at r = 1, with the f_{N−3} entry eliminated through row N−2.
        let e3 = 1.0 / (2.0 * h);
        let e2 = -4.0 / (2.0 * h);
        let e1 = 3.0 / (2.0 * h) - kappa;
        let k = nr - 2;
        let q = e3 / a[k];
        a[nr - 1] = e2 - q * b[k];
        b[nr - 1] = e1 - q * c[k];
        d[nr - 1] = -d[k] * q;
        let rhs: Vec<Complex64> = d.clone();
        thomas(&a, &b, &c, &mut d)?;
        for i in 0..nr - 1 {
            let lhs = if i > 0 { d[i - 1] * a[i] } else { Complex64::new(0.0, 0.0) } + d[i] * b[i] + d[i + 1] * c[i];
            worst_res = worst_res.max((lhs - rhs[i]).norm());
        }
        let robin = (d[nr - 1] * 3.0 - d[nr - 2] * 4.0 + d[nr - 3]) / (2.0 * h) - d[nr - 1] * kappa;
        worst_res = worst_res.max(robin.norm());
        for i in 0..nr {
            sol[i][m] = d[i];
        }
    }
    let w = f.from_spectrum(&sol);
    let w0 = (9.0 * sol[0][0].re - sol[1][0].re) / 8.0;
    let w1 = w.get(nr - 1, 0);
    let c0 = w0 / nf;
    let c1 = (w1 - w0) / robin_chi(Complex64::new(1.0, 0.0));
    let psi: Vec<f64> = (0..w.values().len())
        .map(|k| w.values()[k] - w0 - c1 * robin_chi(w.node(k / np, k % np)))
        .collect();
    let regular = w.with_values(psi)?;

    let mut sup_psi: f64 = 0.0;
    let mut sup_f: f64 = 0.0;
    for k in 0..regular.values().len() {
        let z = regular.node(k / np, k % np);
        let g = weight_gamma(z, n, spec.weight);
        if g > SINGULAR_FLOOR {
            sup_psi = sup_psi.max(g.powf(-spec.nu) * regular.values()[k].abs());
            sup_f = sup_f.max(g.powf(2.0 - spec.nu) * sanitized.values()[k].abs());
        }
    }
    Ok(DeficiencyDecomposition {
        regular,
        c0_star: c0,
        c1_star: Some(c1),
        d0_star: None,
        d1_star: None,
        residual: worst_res,
        norm_ratio: if sup_f > 0.0 { Some(sup_psi / sup_f) } else { None },
    })
}

/// Reject `δ ∉ (−1, 0) ∪ (0, 1)`.
pub fn check_delta(delta: f64) -> Result<()> {
    if delta > -1.0 && delta < 1.0 && delta != 0.0 {
        Ok(())
    } else {
        Err(FbmsError::InvalidParameter(format!("delta = {delta} not in (-1,0)∪(0,1)")))
    }
}

/// Truncation length `T` with `(cosh T)^{−(1−|δ|)} = 1e−10`.
pub fn truncation_length(delta: f64) -> f64 {
    (1e10f64.ln() / (1.0 - delta.abs())).exp().acosh()
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Even solution of `w'' + (2 sech²σ − j²) w = f_j` for even `f_j`.
#[derive(Clone)]
pub struct JacobiModeSolution {
    pub j: u32,
    pub delta: f64,
    pub t_max: f64,
    panel: f64,
    f: RealFn,
    /// Cumulative integrals at panel knots (meaning depends on `j`).
    cum: Vec<[f64; 2]>,
    /// Mode 0: `K = ∫_0^∞ tanh f`, the coefficient of `σ tanh σ − 1` in the growth of `w₀`.
    /// Mode 1: `∫_0^∞ sech f`, the coefficient of the growing solution.
    pub kernel_coeff: f64,
    /// Mode 0 only: `lim (w₀ − K(σ tanh σ − 1))`.
    pub d_star: Option<f64>,
}

impl std::fmt::Debug for JacobiModeSolution {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("JacobiModeSolution")
            .field("j", &self.j)
            .field("delta", &self.delta)
            .field("t_max", &self.t_max)
            .field("kernel_coeff", &self.kernel_coeff)
            .field("d_star", &self.d_star)
            .finish()
    }
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Solve one Fourier mode of the Jacobi equation.
///
/// `j = 0`: `w₀ = tanh σ ∫_0^σ tanh⁻²t ∫_0^t tanh ξ f(ξ) dξ dt`.
/// `j = 1`: `w₁ = sech σ ∫_0^σ cosh²t ∫_0^t sech ξ f(ξ) dξ dt`.
/// `j ≥ 2`: the decaying solution by variation of parameters with
/// `u_± = e^{±jσ}(j ∓ tanh σ)`.
pub fn jacobi_mode_solve(f: RealFn, j: i64, delta: f64) -> Result<JacobiModeSolution> {
    check_delta(delta)?;
    for s in [0.3, 1.7, 4.2] {
        let (a, b) = (f(s), f(-s));
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(FbmsError::InvalidField(format!("f_j is not even: f({s}) = {a}, f(−{s}) = {b}")));
        }
    }
    let j = j.unsigned_abs() as u32;
    let t_max = truncation_length(delta);
    let panel = if j >= 2 { (2.0 / j as f64).min(0.25) } else { 0.25 };
    let nk = (t_max / panel).ceil() as usize;
    let knots = |k: usize| k as f64 * panel;
    let mut sol = JacobiModeSolution {
        j,
        delta,
        t_max: nk as f64 * panel,
        panel,
        f: f.clone(),
        cum: vec![[0.0; 2]; nk + 1],
        kernel_coeff: 0.0,
        d_star: None,
    };
    match j {
        0 | 1 => {
            let (inner_w, outer_w): (fn(f64) -> f64, fn(f64) -> f64) = if j == 0 {
                (f64::tanh, |t: f64| 1.0 / t.tanh().powi(2))
            } else {
                (sech, |t: f64| t.cosh().powi(2))
            };
            for k in 0..nk {
                let (a, b) = (knots(k), knots(k + 1));
                let i_a = sol.cum[k][0];
                let fi = |t: f64| inner_w(t) * f(t);
                let outer = |t: f64| outer_w(t) * (i_a + gl_panel(&fi, a, t));
                sol.cum[k + 1] = [i_a + gl_panel(&fi, a, b), sol.cum[k][1] + gl_panel(&outer, a, b)];
            }
            let [k_inf, j_inf] = sol.cum[nk];
            sol.kernel_coeff = k_inf;
            if j == 0 {
                sol.d_star = Some(j_inf - k_inf * sol.t_max + k_inf);
            }
        }
        _ => {
            let jf = j as f64;
            // cum[k][0] = p(σ_k) = ∫_{σ_k}^T e^{−j(t−σ_k)}(j + tanh t) f dt
            // cum[k][1] = q̃(σ_k) = ∫_0^{σ_k} e^{−j(σ_k−t)}(j − tanh t) f dt
            let decay = (-jf * panel).exp();
            for k in (0..nk).rev() {
                let a = knots(k);
                let g = |t: f64| (-jf * (t - a)).exp() * (jf + t.tanh()) * f(t);
                sol.cum[k][0] = decay * sol.cum[k + 1][0] + gl_panel(&g, a, knots(k + 1));
            }
            for k in 0..nk {
                let b = knots(k + 1);
                let g = |t: f64| (-jf * (b - t)).exp() * (jf - t.tanh()) * f(t);
                sol.cum[k + 1][1] = decay * sol.cum[k][1] + gl_panel(&g, knots(k), b);
            }
        }
    }
    Ok(sol)
}

impl JacobiModeSolution {
    /// `w_j(σ)`, extended evenly; constant beyond the truncation length.
    pub fn eval(&self, sigma: f64) -> f64 {
        let s = sigma.abs().min(self.t_max);
        let k = ((s / self.panel).floor() as usize).min(self.cum.len() - 2);
        let a = k as f64 * self.panel;
        let f = &self.f;
        match self.j {
            0 | 1 => {
                let (inner_w, outer_w): (fn(f64) -> f64, fn(f64) -> f64) = if self.j == 0 {
                    (f64::tanh, |t: f64| 1.0 / t.tanh().powi(2))
                } else {
                    (sech, |t: f64| t.cosh().powi(2))
                };
                let i_a = self.cum[k][0];
                let fi = |t: f64| inner_w(t) * f(t);
                let outer = |t: f64| outer_w(t) * (i_a + gl_panel(&fi, a, t));
                let jv = self.cum[k][1] + if s > a { gl_panel(&outer, a, s) } else { 0.0 };
                if self.j == 0 {
                    s.tanh() * jv
                } else {
                    sech(s) * jv
                }
            }
            j => {
                let jf = j as f64;
                let b = a + self.panel;
                let gp = |t: f64| (-jf * (t - s)).exp() * (jf + t.tanh()) * f(t);
                let gq = |t: f64| (-jf * (s - t)).exp() * (jf - t.tanh()) * f(t);
                let p = (-jf * (b - s)).exp() * self.cum[k + 1][0] + if b > s { gl_panel(&gp, s, b) } else { 0.0 };
                let qt = (-jf * (s - a)).exp() * self.cum[k][1] + if s > a { gl_panel(&gq, a, s) } else { 0.0 };
                let q = (-jf * s).exp() * self.cum[0][0] + qt;
                let th = s.tanh();
                -((jf - th) * p + (jf + th) * q) / (2.0 * jf * (jf * jf - 1.0))
            }
        }
    }

    /// Mode 0: the bounded solution `w₀ − K(σ tanh σ − 1)`, tending to `d*`.
    pub fn eval_bounded(&self, sigma: f64) -> f64 {
        let w = self.eval(sigma);
        if self.j == 0 {
            let s = sigma.abs();
            w - self.kernel_coeff * (s * s.tanh() - 1.0)
        } else {
            w
        }
    }
}

/// `L_cat` applied to `σ tanh σ − 1` and to `tanh σ`, both evaluated in closed form.
pub fn jacobi_kernel_residuals(sigma: f64) -> [f64; 2] {
    let (t, s2) = (sigma.tanh(), sech(sigma).powi(2));
    let q = sigma * t - 1.0;
    let q2 = 2.0 * s2 - 2.0 * sigma * s2 * t;
    let p2 = -2.0 * s2 * t;
    [q2 + 2.0 * s2 * q, p2 + 2.0 * s2 * t]
}

/// `∂²_s + 2/(n² cosh²(s/n))` applied to `(s/n) tanh(s/n) − 1`.
pub fn neck_kernel_residual(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    let x = s / nf;
    let (t, s2) = (x.tanh(), sech(x).powi(2));
    let q = x * t - 1.0;
    let q2 = (2.0 * s2 - 2.0 * x * s2 * t) / (nf * nf);
    q2 + 2.0 * s2 * q / (nf * nf)
}

/// Kernel of `L_cat` on even mode-0 functions within the `(cosh σ)^δ` class.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub delta: f64,
    pub residual_sigma_tanh: f64,
    pub residual_tanh: f64,
    /// `σ tanh σ − 1` grows linearly, so it lies in the class iff `δ > 0`.
    pub sigma_tanh_admissible: bool,
    /// `tanh σ` is bounded but odd, so the even symmetry excludes it.
    pub tanh_admissible: bool,
    pub trivial: bool,
}

pub fn jacobi_kernel_check(delta: f64) -> Result<KernelReport> {
    check_delta(delta)?;
    let mut r0: f64 = 0.0;
    let mut r1: f64 = 0.0;
    for s in [-3.0, -1.0, 0.0, 1.0, 3.0, 7.5] {
        let [a, b] = jacobi_kernel_residuals(s);
        r0 = r0.max(a.abs());
        r1 = r1.max(b.abs());
    }
    let sigma_tanh_admissible = delta > 0.0;
    Ok(KernelReport {
        delta,
        residual_sigma_tanh: r0,
        residual_tanh: r1,
        sigma_tanh_admissible,
        tanh_admissible: false,
        trivial: !sigma_tanh_admissible,
    })
}

/// Which cylinder problem [`solve_jacobi`] solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobiVariant {
    /// `(σ, θ) ∈ ℝ × [π/2, 3π/2]` with `∂_θ w = 0` on both edges.
    HalfBridge,
    /// `∂²_s + ∂²_φ + 2/(n² cosh²(s/n))` on `ℝ × S¹`.
    NeckScaled(usize),
}

pub type CylinderFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Mode-by-mode solution of a Jacobi problem on a cylinder.
#[derive(Clone, Debug)]
pub struct JacobiSolution {
    pub variant: JacobiVariant,
    pub modes: Vec<JacobiModeSolution>,
    pub kernel_coeff: f64,
    pub d_star: f64,
}

impl JacobiSolution {
    /// `w(σ, θ)` in unscaled variables; mode 0 uses its bounded representative.
    pub fn eval_unscaled(&self, sigma: f64, theta: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let v = if m.j == 0 { m.eval_bounded(sigma) } else { m.eval(sigma) };
                v * (m.j as f64 * theta).cos()
            })
            .sum()
    }

    /// `∂_θ w(σ, θ)` in unscaled variables.
    pub fn eval_unscaled_dtheta(&self, sigma: f64, theta: f64) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.j > 0)
            .map(|m| -(m.j as f64) * m.eval(sigma) * (m.j as f64 * theta).sin())
            .sum()
    }

    /// `w` in the variables of the problem (`(s, φ)` for the neck).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.variant {
            JacobiVariant::HalfBridge => self.eval_unscaled(x, y),
            JacobiVariant::NeckScaled(n) => self.eval_unscaled(x / n as f64, y / n as f64),
        }
    }
}

/// Solve `L w = f` on the cylinder by Fourier decomposition in the angle.
///
/// `f` must satisfy `f(σ, θ) = f(−σ, θ) = f(σ, −θ)`. Modes up to `max_mode` are kept,
/// with `angles` samples per period used for the projection.
pub fn solve_jacobi(
    f: CylinderFn,
    variant: JacobiVariant,
    delta: f64,
    angles: usize,
    max_mode: usize,
) -> Result<JacobiSolution> {
    check_delta(delta)?;
    for &(s, t) in &[(0.4, 0.3), (1.3, 2.0), (2.2, 1.1)] {
        let (t, lo) = match variant {
            JacobiVariant::HalfBridge => (t + 0.5 * PI, 0.5 * PI),
            JacobiVariant::NeckScaled(_) => (t, 0.0),
        };
        let v = f(s, t);
        let refl = [f(-s, t), f(s, 2.0 * lo - t)];
        if refl.iter().any(|r| (r - v).abs() > 1e-10 * (1.0 + v.abs())) {
            return Err(FbmsError::InvalidField("right-hand side lacks the required reflection symmetries".into()));
        }
    }
    // Unscaled right-hand side on the full circle.
    let g: CylinderFn = match variant {
        JacobiVariant::HalfBridge => {
            let f = f.clone();
            Arc::new(move |s: f64, t: f64| {
                let t = t.rem_euclid(2.0 * PI);
                let t = if (0.5 * PI..=1.5 * PI).contains(&t) { t } else { (PI - t).rem_euclid(2.0 * PI) };
                f(s, t)
            })
        }
        JacobiVariant::NeckScaled(n) => {
            let f = f.clone();
            let nf = n as f64;
            Arc::new(move |s: f64, t: f64| nf * nf * f(nf * s, nf * t))
        }
    };
    let thetas: Arc<Vec<f64>> = Arc::new((0..angles).map(|k| 2.0 * PI * k as f64 / angles as f64).collect());
    let mut modes = Vec::new();
    for j in 0..=max_mode.min(angles / 2) {
        let (g, th) = (g.clone(), thetas.clone());
        let norm = if j == 0 { 1.0 } else { 2.0 } / angles as f64;
        let probe: Vec<f64> = [0.0, 0.7, 2.0]
            .iter()
            .map(|&s| th.iter().map(|&t| g(s, t) * (j as f64 * t).cos()).sum::<f64>() * norm)
            .collect();
        if probe.iter().all(|p| p.abs() < 1e-14) {
            continue;
        }
        let fj: RealFn = Arc::new(move |s: f64| th.iter().map(|&t| g(s, t) * (j as f64 * t).cos()).sum::<f64>() * norm);
        modes.push(jacobi_mode_solve(fj, j as i64, delta)?);
    }
    let (kernel_coeff, d_star) = modes
        .iter()
        .find(|m| m.j == 0)
        .map(|m| (m.kernel_coeff, m.d_star.unwrap_or(0.0)))
        .unwrap_or((0.0, 0.0));
    Ok(JacobiSolution { variant, modes, kernel_coeff, d_star })
}

//! Singular solutions of the linearized problem on the disk.
//!
//! * `H_k(z) = Σ_{j≥1} z^j / j^{k+1}` (polylogarithm `Li_{k+1}`),
//! * `G_n(z) = −n/2 + Re Σ_{j≥1} n z^j/(nj − 1)`, harmonic with a logarithmic
//!   singularity at `z = 1` and Robin data `n ∂_r G_n − G_n = 0` elsewhere on the circle,
//! * `G̃_n(z) = −n − log|z|`,
//! * `Γ_n(z) = G_n(zⁿ)/B(z)` and `Γ̃_n(z) = G̃_n(zⁿ)/B(z)`,
//! * the expansion constant `c(n) = −log n + Σ_{k≥1} ζ(k+1)/n^k`.
//!
//! Writing `S(w) = Σ_j w^j/(j − 1/n)`, the function `G_n = −n/2 + Re S` and
//! `S' = 1/(1−w) + S/(nw)`. Near the unit circle `S` is resummed as
//! `Σ_{k<K} Li_{k+1}(w)/n^k` plus a rapidly convergent remainder.

use crate::ball_geometry::eval_b;
use crate::error::{FbmsError, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of closed-form polylog terms used by the resummed path.
const RESUM_TERMS: usize = 8;
/// Switch radius between the direct and resummed paths.
const DIRECT_RADIUS: f64 = 0.5;

/// Summation policy for the direct series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Guard {
    /// Plain floating point accumulation.
    #[default]
    Plain,
    /// Kahan compensated accumulation.
    Compensated,
}

/// Series parameters for `G_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenSeries {
    pub n: usize,
    /// Number of terms of the direct series (and of the resummed remainder).
    pub j_max: usize,
    pub guard: Guard,
}

impl GreenSeries {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_terms(n, 4096)
    }

    pub fn with_terms(n: usize, j_max: usize) -> Result<Self> {
        if n < 2 {
            return Err(FbmsError::InvalidParameter(format!("n = {n} < 2")));
        }
        if j_max < 64 {
            return Err(FbmsError::InvalidParameter(format!("J = {j_max} < 64")));
        }
        Ok(GreenSeries { n, j_max, guard: Guard::Plain })
    }

    /// Tail bound `n|z|^{J+1}/((nJ−1)(1−|z|))` of the direct series.
    pub fn direct_tail_bound(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let j = self.j_max as f64;
        n * r.powf(j + 1.0) / ((n * j - 1.0) * (1.0 - r))
    }
}

/// Which summation order produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummationPath {
    Series,
    Resummed,
}

/// A series value with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub bound: f64,
    pub path: SummationPath,
}

struct Tables {
    /// `ζ(s)` for `s = 0..ZETA_MAX` (index 0 and 1 unused).
    zeta: Vec<f64>,
}

const ZETA_MAX: usize = 200;

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut zeta = vec![f64::NAN; ZETA_MAX + 1];
        for (s, z) in zeta.iter_mut().enumerate().skip(2) {
            *z = zeta_euler_maclaurin(s as u32);
        }
        Tables { zeta }
    })
}

fn zeta_euler_maclaurin(s: u32) -> f64 {
    // Σ_{j<N} j^{-s} + N^{1-s}/(s-1) + N^{-s}/2 + Σ_k B_{2k}/(2k)! (s)_{2k-1} N^{-s-2k+1}
    const BERN: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let n = 12.0f64;
    let sf = s as f64;
    let mut sum = 0.0;
    for j in (1..12).rev() {
        sum += (j as f64).powf(-sf);
    }
    sum += n.powf(1.0 - sf) / (sf - 1.0) + 0.5 * n.powf(-sf);
    let mut rising = sf; // (s)_{2k-1}
    let mut fact = 2.0; // (2k)!
    let mut npow = n.powf(-sf - 1.0);
    for (k, b) in BERN.iter().enumerate() {
        let k = k + 1;
        sum += b / fact * rising * npow;
        let kk = 2.0 * k as f64;
        rising *= (sf + kk - 1.0) * (sf + kk);
        fact *= (kk + 1.0) * (kk + 2.0);
        npow /= n * n;
    }
    sum
}

/// Riemann zeta at an integer `s ≥ 2`.
pub fn zeta_int(s: u32) -> f64 {
    if (s as usize) <= ZETA_MAX && s >= 2 {
        tables().zeta[s as usize]
    } else if s > ZETA_MAX as u32 {
        1.0
    } else {
        f64::NAN
    }
}

/// `ζ(−m)/(m+s)!` for `m ≥ 1`, via the functional equation.
fn zeta_negative_over_factorial(m: usize, s: usize) -> f64 {
    if m % 2 == 0 {
        return 0.0;
    }
    // ζ(−m)/m! = (−1)^{(m+1)/2} 2 ζ(m+1)/(2π)^{m+1}; then divide by (m+1)…(m+s).
    let sign = if ((m + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let mut c = sign * 2.0 * zeta_int((m + 1) as u32) / (2.0 * PI);
    for _ in 0..m {
        c /= 2.0 * PI;
    }
    for i in 1..=s {
        c /= (m + i) as f64;
    }
    c
}

/// `Li_s(w)` for integer `s ≥ 1`, `|w| ≤ 1`, `w ≠ 1` when `s = 1`.
pub fn polylog(s: usize, w: Complex64) -> Result<Complex64> {
    if s == 0 {
        return Err(FbmsError::InvalidParameter("Li_0 not supported".into()));
    }
    let r = w.norm();
    if r > 1.0 + 1e-12 || !w.is_finite() {
        return Err(FbmsError::OutOfChart(format!("|w| > 1: {w}")));
    }
    if s == 1 {
        if (w - 1.0).norm() == 0.0 {
            return Err(FbmsError::InvalidParameter("H_0 singular at z = 1".into()));
        }
        return Ok(-(1.0 - w).ln());
    }
    if r <= DIRECT_RADIUS {
        return Ok(polylog_direct(s, w));
    }
    Ok(polylog_log_expansion(s, w))
}

fn polylog_direct(s: usize, w: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut p = w;
    let r = w.norm();
    let mut j = 1usize;
    while j < 10_000 {
        sum += p / (j as f64).powi(s as i32);
        if r.powi(j as i32) < 1e-18 {
            break;
        }
        p *= w;
        j += 1;
    }
    sum
}

/// Expansion of `Li_s(e^μ)` in powers of `μ = log w`, valid for `|μ| < 2π`.
fn polylog_log_expansion(s: usize, w: Complex64) -> Complex64 {
    let mu = w.ln();
    let mut sum = Complex64::new(0.0, 0.0);
    // k < s−1 : ζ(s−k) μ^k/k!
    let mut pw = Complex64::new(1.0, 0.0); // μ^k/k!
    for k in 0..s - 1 {
        sum += zeta_int((s - k) as u32) * pw;
        pw = pw * mu / (k + 1) as f64;
    }
    // k = s−1 : μ^{s−1}/(s−1)! (H_{s−1} − log(−μ))
    if mu.norm() > 0.0 {
        let harmonic: f64 = (1..s).map(|i| 1.0 / i as f64).sum();
        sum += pw * (harmonic - (-mu).ln());
    }
    // k = s : ζ(0) μ^s/s!
    let mut mus = mu.powu(s as u32);
    let mut fact = 1.0;
    for i in 1..=s {
        fact *= i as f64;
    }
    sum += -0.5 * mus / fact;
    // k = s + m, m ≥ 1 odd : ζ(−m) μ^{s+m}/(s+m)!
    let mut m = 1usize;
    let mu2 = mu * mu;
    mus *= mu;
    while m < 400 {
        let term = zeta_negative_over_factorial(m, s) * mus;
        sum += term;
        if term.norm() < 1e-18 * (1.0 + sum.norm()) && m > 8 {
            break;
        }
        mus *= mu2;
        m += 2;
    }
    sum
}

/// `H_k(z) = Li_{k+1}(z)`.
pub fn polylog_hk(k: usize, z: Complex64) -> Result<Complex64> {
    polylog(k + 1, z)
}

/// Partial sum `Σ_{j≤J} z^j/j^{k+1}` and a bound on the omitted tail.
pub fn polylog_hk_partial(k: usize, z: Complex64, j_max: usize) -> (Complex64, f64) {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut p = Complex64::new(1.0, 0.0);
    for j in 1..=j_max {
        p *= z;
        sum += p / (j as f64).powi(k as i32 + 1);
    }
    let r = z.norm();
    let jf = j_max as f64;
    let bound = if r < 1.0 {
        r.powf(jf + 1.0) / ((jf + 1.0).powi(k as i32 + 1) * (1.0 - r))
    } else if k >= 1 {
        1.0 / (k as f64 * jf.powi(k as i32))
    } else {
        f64::INFINITY
    };
    (sum, bound)
}

/// `S(w)`, `S'(w)`, `S''(w)` for `S(w) = Σ_j w^j/(j − 1/n)`.
pub fn s_series(w: Complex64, n: usize) -> Result<[Complex64; 3]> {
    let r = w.norm();
    if r > 1.0 + 1e-12 {
        return Err(FbmsError::OutOfChart(format!("|w| > 1: {w}")));
    }
    if (w - 1.0).norm() == 0.0 {
        return Err(FbmsError::InvalidParameter("G_n singular at z = 1".into()));
    }
    let a = 1.0 / n as f64;
    if r <= DIRECT_RADIUS {
        let mut s0 = Complex64::new(0.0, 0.0);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut pm2 = Complex64::new(1.0, 0.0); // w^{j-2} for j ≥ 2
        // j = 1
        let c1 = 1.0 / (1.0 - a);
        s0 += c1 * w;
        s1 += c1;
        let mut j = 2usize;
        loop {
            let jf = j as f64;
            let c = 1.0 / (jf - a);
            let pm1 = pm2 * w;
            s2 += c * jf * (jf - 1.0) * pm2;
            s1 += c * jf * pm1;
            s0 += c * pm1 * w;
            if r.powi(j as i32 - 2) * jf * jf < 1e-19 || j > 4000 {
                break;
            }
            pm2 = pm1;
            j += 1;
        }
        return Ok([s0, s1, s2]);
    }
    let s0 = s_resummed(w, n, 64).0;
    let q = 1.0 / (1.0 - w);
    let s1 = q + a * s0 / w;
    let s2 = q * q + a * (s1 / w - s0 / (w * w));
    Ok([s0, s1, s2])
}

/// Resummed `S(w) = Σ_{k<K} Li_{k+1}(w)/n^k + Σ_{j≤J} w^j/(n^{K−1} j^K (nj−1))` with tail bound.
pub fn s_resummed(w: Complex64, n: usize, j_max: usize) -> (Complex64, f64) {
    let nf = n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 1.0;
    for k in 0..RESUM_TERMS {
        sum += scale * polylog(k + 1, w).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        scale /= nf;
    }
    // scale = n^{-K}
    let kk = RESUM_TERMS as i32;
    let mut p = Complex64::new(1.0, 0.0);
    let mut rem = Complex64::new(0.0, 0.0);
    for j in 1..=j_max {
        p *= w;
        let jf = j as f64;
        rem += p / (jf.powi(kk) * (jf - 1.0 / nf));
    }
    let jf = j_max as f64;
    let bound = scale / (RESUM_TERMS as f64 * jf.powi(kk) * (1.0 - 1.0 / (nf * jf)));
    (sum + scale * rem, bound)
}

fn direct_series(z: Complex64, p: &GreenSeries) -> SeriesValue {
    let n = p.n as f64;
    let mut pw = Complex64::new(1.0, 0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for j in 1..=p.j_max {
        pw *= z;
        let term = n * pw.re / (n * j as f64 - 1.0);
        match p.guard {
            Guard::Plain => sum += term,
            Guard::Compensated => {
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
        }
    }
    SeriesValue { value: -0.5 * n + sum, bound: p.direct_tail_bound(z.norm()), path: SummationPath::Series }
}

/// `G_n(z)` by the direct series form.
pub fn green_gn_series(z: Complex64, p: &GreenSeries) -> Result<SeriesValue> {
    check_gn_domain(z)?;
    Ok(direct_series(z, p))
}

/// `G_n(z)` by the resummed form `−n/2 + Re Σ_k H_k(z)/n^k`.
pub fn green_gn_resummed(z: Complex64, p: &GreenSeries) -> Result<SeriesValue> {
    check_gn_domain(z)?;
    let (s, bound) = s_resummed(z, p.n, p.j_max);
    Ok(SeriesValue { value: -0.5 * p.n as f64 + s.re, bound: bound + 1e-15, path: SummationPath::Resummed })
}

fn check_gn_domain(z: Complex64) -> Result<()> {
    if z.norm() > 1.0 + 1e-12 || !z.is_finite() {
        return Err(FbmsError::OutOfChart(format!("|z| > 1: {z}")));
    }
    if (z - 1.0).norm() == 0.0 {
        return Err(FbmsError::InvalidParameter("G_n singular at z = 1".into()));
    }
    Ok(())
}

/// `G_n(z)` choosing the series form when its tail bound is negligible.
pub fn green_gn(z: Complex64, p: &GreenSeries) -> Result<SeriesValue> {
    check_gn_domain(z)?;
    if p.direct_tail_bound(z.norm()) < 1e-15 {
        Ok(direct_series(z, p))
    } else {
        green_gn_resummed(z, p)
    }
}

/// Holomorphic `F(z) = −n/2 + S(zⁿ)` with `F'` and `F''`; `Re F = G_n(zⁿ)`.
pub fn gn_composed_holo(z: Complex64, n: usize) -> Result<[Complex64; 3]> {
    let w = z.powu(n as u32);
    let [s0, s1, s2] = s_series(w, n)?;
    let nf = n as f64;
    let zn1 = if n >= 1 { z.powu(n as u32 - 1) } else { Complex64::new(1.0, 0.0) };
    let zn2 = if n >= 2 { z.powu(n as u32 - 2) } else { Complex64::new(0.0, 0.0) };
    let dw = nf * zn1;
    Ok([
        s0 - 0.5 * nf,
        s1 * dw,
        s2 * dw * dw + s1 * nf * (nf - 1.0) * zn2,
    ])
}

/// Holomorphic `F̃(z) = −n − n log z` with derivatives; `Re F̃ = G̃_n(zⁿ)`.
pub fn gnt_composed_holo(z: Complex64, n: usize) -> Result<[Complex64; 3]> {
    if z.norm() == 0.0 {
        return Err(FbmsError::InvalidParameter("G̃_n singular at z = 0".into()));
    }
    let nf = n as f64;
    Ok([
        Complex64::new(-nf - nf * z.norm().ln(), -nf * z.arg()),
        -nf / z,
        nf / (z * z),
    ])
}

/// `G̃_n(z) = −n − log|z|`.
pub fn green_gn_tilde(z: Complex64, n: usize) -> Result<f64> {
    let r = z.norm();
    if r == 0.0 {
        return Err(FbmsError::InvalidParameter("G̃_n singular at z = 0".into()));
    }
    if r > 1.0 + 1e-12 {
        return Err(FbmsError::OutOfChart(format!("|z| > 1: {z}")));
    }
    Ok(-(n as f64) - r.ln())
}

/// Which Green function a `Γ` refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaKind {
    Plain,
    Tilde,
}

/// `Γ_n(z) = G_n(zⁿ)/B(z)` or `Γ̃_n(z) = G̃_n(zⁿ)/B(z)`.
pub fn gamma_fn(z: Complex64, n: usize, kind: GammaKind) -> Result<f64> {
    let w = z.powu(n as u32);
    let g = match kind {
        GammaKind::Plain => {
            let p = GreenSeries::new(n)?;
            green_gn(w, &p)?.value
        }
        GammaKind::Tilde => {
            if z.norm() == 0.0 {
                return Err(FbmsError::InvalidParameter("Γ̃_n singular at z = 0".into()));
            }
            -(n as f64) - n as f64 * z.norm().ln()
        }
    };
    Ok(g / eval_b(z))
}

/// How the boundary Robin identity of the truncated series is probed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RobinProbe {
    /// Abel weights `q^j` at angle `phi`, truncated at `j_max` terms.
    Abel { q: f64, phi: f64, j_max: usize },
    /// Pairing with the smooth even bump supported in `a ≤ |φ| ≤ b ⊂ (0, π]`, truncated at `j_max`.
    TestFunction { a: f64, b: f64, j_max: usize },
}

/// Defect of `n ∂_r − 1` applied to the truncated series at `r = 1`.
///
/// Each term `n z^j/(nj−1)` contributes `n cos(jφ)` and the constant
/// contributes `n/2`. For the Abel probe the value returned is the mismatch
/// between the truncated weighted sum and its closed form; for the test
/// function probe it is the paired defect, which tends to zero with `j_max`.
pub fn robin_defect_series(n: usize, kind: GammaKind, probe: RobinProbe) -> Result<f64> {
    if kind == GammaKind::Tilde {
        return Ok(0.0);
    }
    let nf = n as f64;
    match probe {
        RobinProbe::Abel { q, phi, j_max } => {
            if !(0.0..1.0).contains(&q) {
                return Err(FbmsError::InvalidParameter(format!("Abel parameter q = {q}")));
            }
            let mut partial = 0.5 * nf;
            let mut qj = 1.0;
            for j in 1..=j_max {
                qj *= q;
                partial += nf * qj * (j as f64 * phi).cos();
            }
            let e = Complex64::from_polar(q, phi);
            let closed = 0.5 * nf + nf * (e / (1.0 - e)).re;
            Ok((partial - closed).abs())
        }
        RobinProbe::TestFunction { a, b, j_max } => {
            if !(0.0 < a && a < b && b <= PI) {
                return Err(FbmsError::InvalidParameter("test function support must avoid φ = 0".into()));
            }
            // ∫_{−π}^{π} ψ(φ)(n/2 + n Σ_{j≤J} cos jφ) dφ with ψ even.
            let quad = gauss_legendre_32();
            let psi = |t: f64| bump((t - a) / (b - a));
            let mut moments = vec![0.0; j_max + 1];
            let panels = 64;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * h;
                for (x, wq) in quad.iter() {
                    let t = lo + 0.5 * h * (x + 1.0);
                    let wt = 0.5 * h * wq * psi(t) * 2.0;
                    for (j, m) in moments.iter_mut().enumerate() {
                        *m += wt * (j as f64 * t).cos();
                    }
                }
            }
            let mut total = 0.5 * nf * moments[0];
            for m in moments.iter().skip(1) {
                total += nf * m;
            }
            Ok(total.abs())
        }
    }
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// 32-point Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre_32() -> &'static [(f64, f64)] {
    static Q: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    Q.get_or_init(|| gauss_legendre(32))
}

/// Gauss–Legendre rule with `m` nodes, computed by Newton iteration on `P_m`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `c(n) = −log n + Σ_{k≥1} ζ(k+1)/n^k`.
pub fn expansion_constant_c(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(FbmsError::InvalidParameter(format!("n = {n} < 2")));
    }
    let nf = n as f64;
    let mut sum = 0.0;
    let mut p = 1.0;
    for k in 1..400 {
        p /= nf;
        let t = zeta_int(k as u32 + 1) * p;
        sum += t;
        if t < 1e-18 {
            break;
        }
    }
    Ok(-nf.ln() + sum)
}

/// The rational function `h_n` regular at `z_m`, in its closed form.
pub fn h_n(z: Complex64, m: usize, n: usize) -> Complex64 {
    let zm = crate::ball_geometry::root_of_unity(m, n);
    let mut num = -z.powi(n as i32 - 2);
    for k in 2..n {
        let mut inner = Complex64::new(0.0, 0.0);
        for l in 0..=k - 2 {
            inner += z.powi((k - 2 - l) as i32) * zm.powi(l as i32);
        }
        num += zm * z.powi((n - 1 - k) as i32) * inner;
    }
    let mut den = Complex64::new(0.0, 0.0);
    for k in 0..n {
        den += z.powi((n - 1 - k) as i32) * zm.powi(k as i32);
    }
    num / (zm * den)
}

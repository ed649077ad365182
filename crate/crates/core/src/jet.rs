//! Second-order forward-mode jets in two parameters.
//!
//! A [`Jet`] carries a value together with its first and second partial
//! derivatives with respect to two chart parameters `(u, v)`. [`CJet`] is the
//! complex analogue and supports composition with holomorphic functions given
//! by `(f, f', f'')`.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Real 2-jet: value, gradient and Hessian with respect to `(u, v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

impl Jet {
    pub const fn new(v: f64, du: f64, dv: f64, duu: f64, duv: f64, dvv: f64) -> Self {
        Jet { v, du, dv, duu, duv, dvv }
    }

    pub const fn constant(v: f64) -> Self {
        Jet::new(v, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// The coordinate function `u` at value `x`.
    pub const fn var_u(x: f64) -> Self {
        Jet::new(x, 1.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// The coordinate function `v` at value `y`.
    pub const fn var_v(y: f64) -> Self {
        Jet::new(y, 0.0, 1.0, 0.0, 0.0, 0.0)
    }

    /// Components in the order `[v, du, dv, duu, duv, dvv]`.
    pub fn to_array(self) -> [f64; 6] {
        [self.v, self.du, self.dv, self.duu, self.duv, self.dvv]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Jet::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    /// Compose with a scalar function given its value and first two derivatives at `self.v`.
    #[inline]
    pub fn lift(self, f: f64, f1: f64, f2: f64) -> Self {
        Jet {
            v: f,
            du: f1 * self.du,
            dv: f1 * self.dv,
            duu: f2 * self.du * self.du + f1 * self.duu,
            duv: f2 * self.du * self.dv + f1 * self.duv,
            dvv: f2 * self.dv * self.dv + f1 * self.dvv,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet::new(c * self.v, c * self.du, c * self.dv, c * self.duu, c * self.duv, c * self.dvv)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.lift(r, -r * r, 2.0 * r * r * r)
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.lift(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn powi(self, k: i32) -> Self {
        let kf = k as f64;
        self.lift(
            self.v.powi(k),
            kf * self.v.powi(k - 1),
            kf * (kf - 1.0) * self.v.powi(k - 2),
        )
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.lift(e, e, e)
    }

    pub fn ln(self) -> Self {
        self.lift(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.lift(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.lift(c, s, c)
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let s2 = 1.0 - t * t;
        self.lift(t, s2, -2.0 * t * s2)
    }

    pub fn atan(self) -> Self {
        let d = 1.0 / (1.0 + self.v * self.v);
        self.lift(self.v.atan(), d, -2.0 * self.v * d * d)
    }

    /// Requires `self.v > 1`.
    pub fn acosh(self) -> Self {
        let q = self.v * self.v - 1.0;
        let d = 1.0 / q.sqrt();
        self.lift(self.v.acosh(), d, -self.v * d / q)
    }

    pub fn asin(self) -> Self {
        let q = 1.0 - self.v * self.v;
        let d = 1.0 / q.sqrt();
        self.lift(self.v.asin(), d, self.v * d / q)
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, o: Jet) -> Jet {
        Jet::new(
            self.v + o.v,
            self.du + o.du,
            self.dv + o.dv,
            self.duu + o.duu,
            self.duv + o.duv,
            self.dvv + o.dvv,
        )
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            du: self.du * o.v + self.v * o.du,
            dv: self.dv * o.v + self.v * o.dv,
            duu: self.duu * o.v + 2.0 * self.du * o.du + self.v * o.duu,
            duv: self.duv * o.v + self.du * o.dv + self.dv * o.du + self.v * o.duv,
            dvv: self.dvv * o.v + 2.0 * self.dv * o.dv + self.v * o.dvv,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

/// Complex 2-jet with respect to real parameters `(u, v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CJet {
    pub v: Complex64,
    pub du: Complex64,
    pub dv: Complex64,
    pub duu: Complex64,
    pub duv: Complex64,
    pub dvv: Complex64,
}

impl CJet {
    pub fn from_parts(re: Jet, im: Jet) -> Self {
        let c = |a: f64, b: f64| Complex64::new(a, b);
        CJet {
            v: c(re.v, im.v),
            du: c(re.du, im.du),
            dv: c(re.dv, im.dv),
            duu: c(re.duu, im.duu),
            duv: c(re.duv, im.duv),
            dvv: c(re.dvv, im.dvv),
        }
    }

    pub fn constant(z: Complex64) -> Self {
        CJet { v: z, ..Default::default() }
    }

    /// `r e^{iφ}` for real jets `r` and `φ`.
    pub fn polar(r: Jet, phi: Jet) -> Self {
        CJet::from_parts(r * phi.cos(), r * phi.sin())
    }

    pub fn re(&self) -> Jet {
        Jet::new(self.v.re, self.du.re, self.dv.re, self.duu.re, self.duv.re, self.dvv.re)
    }

    pub fn im(&self) -> Jet {
        Jet::new(self.v.im, self.du.im, self.dv.im, self.duu.im, self.duv.im, self.dvv.im)
    }

    /// `|z|²` as a real jet.
    pub fn norm_sqr(&self) -> Jet {
        let (a, b) = (self.re(), self.im());
        a * a + b * b
    }

    /// Compose with a holomorphic function given `(f, f', f'')` at `self.v`.
    #[inline]
    pub fn holo(&self, f: Complex64, f1: Complex64, f2: Complex64) -> CJet {
        CJet {
            v: f,
            du: f1 * self.du,
            dv: f1 * self.dv,
            duu: f2 * self.du * self.du + f1 * self.duu,
            duv: f2 * self.du * self.dv + f1 * self.duv,
            dvv: f2 * self.dv * self.dv + f1 * self.dvv,
        }
    }

    pub fn scale(&self, c: Complex64) -> CJet {
        CJet {
            v: self.v * c,
            du: self.du * c,
            dv: self.dv * c,
            duu: self.duu * c,
            duv: self.duv * c,
            dvv: self.dvv * c,
        }
    }

    pub fn mul_real(&self, r: Jet) -> CJet {
        CJet::from_parts(self.re() * r, self.im() * r)
    }

    pub fn add(&self, o: &CJet) -> CJet {
        CJet {
            v: self.v + o.v,
            du: self.du + o.du,
            dv: self.dv + o.dv,
            duu: self.duu + o.duu,
            duv: self.duv + o.duv,
            dvv: self.dvv + o.dvv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(f64, f64) -> f64, j: impl Fn(Jet, Jet) -> Jet, u: f64, v: f64) {
        let h = 1e-4;
        let jet = j(Jet::var_u(u), Jet::var_v(v));
        let fu = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
        let fv = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
        let fuu = (f(u + h, v) - 2.0 * f(u, v) + f(u - h, v)) / (h * h);
        let fvv = (f(u, v + h) - 2.0 * f(u, v) + f(u, v - h)) / (h * h);
        let fuv = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h);
        assert!((jet.v - f(u, v)).abs() < 1e-13);
        for (a, b) in [(jet.du, fu), (jet.dv, fv), (jet.duu, fuu), (jet.duv, fuv), (jet.dvv, fvv)] {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        fd_check(
            |u, v| (u * v).sin() + (u / (1.0 + v * v)).exp(),
            |u, v| (u * v).sin() + (u / (v * v + 1.0)).exp(),
            0.3,
            -0.7,
        );
        fd_check(
            |u, v| (u.cosh() * v.tanh()).atan() + (u * u + v * v + 1.0).sqrt().ln(),
            |u, v| (u.cosh() * v.tanh()).atan() + (u * u + v * v + 1.0).sqrt().ln(),
            0.4,
            0.9,
        );
        fd_check(|u, v| (0.3 * u * v).asin() * v.sinh(), |u, v| (u * v * 0.3).asin() * v.sinh(), 0.5, 0.6);
    }

    #[test]
    fn holomorphic_composition_matches_real_parts() {
        // f(z) = z^3 along z = u + i v.
        let z = CJet::from_parts(Jet::var_u(0.4), Jet::var_v(-0.2));
        let w = z.holo(z.v.powi(3), 3.0 * z.v.powi(2), 6.0 * z.v);
        let re = |u: f64, v: f64| Complex64::new(u, v).powi(3).re;
        let h = 1e-4;
        let fuv = (re(0.4 + h, -0.2 + h) - re(0.4 + h, -0.2 - h) - re(0.4 - h, -0.2 + h) + re(0.4 - h, -0.2 - h))
            / (4.0 * h * h);
        assert!((w.re().duv - fuv).abs() < 1e-6);
        // Harmonic: Re f_uu + Re f_vv = 0.
        assert!((w.re().duu + w.re().dvv).abs() < 1e-12);
    }
}

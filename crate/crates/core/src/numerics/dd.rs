//! Double-double arithmetic (about 31 significant digits).
//!
//! The Fixed Talbot contour sum cancels terms of size `e^{2M/5}` down to
//! O(1); with `M = 64` that is eleven digits lost, which plain `f64` cannot
//! absorb. Only the operations the contour sum and the catalog transforms
//! need are provided.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const HALF_PI: Dd = Dd {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123_233_995_736_766e-17,
    };
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };
    pub const EULER_GAMMA: Dd = Dd {
        hi: 0.577_215_664_901_532_9,
        lo: -4.942_915_152_430_645e-18,
    };

    #[inline]
    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Multiplication by `2^k`, exact.
    pub fn ldexp(self, k: i32) -> Dd {
        Dd {
            hi: libm::scalbn(self.hi, k),
            lo: libm::scalbn(self.lo, k),
        }
    }

    pub fn sqr(self) -> Dd {
        self * self
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.78 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Dd::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = (self - Dd::LN2 * k).ldexp(-10);
        // expm1 of the reduced argument, |r| < 3.5e-4
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / n as f64;
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // (1 + s)^2 - 1 = s (2 + s), ten times undoes the 2^-10 scaling
        for _ in 0..10 {
            sum = sum * (sum + 2.0);
        }
        (sum + 1.0).ldexp(k as i32)
    }

    pub fn ln(self) -> Dd {
        if self.hi.is_nan() || self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    /// Returns `(sin x, cos x)`.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let k = (self.hi / std::f64::consts::FRAC_PI_2).round();
        let r = self - Dd::HALF_PI * k;
        let r2 = r * r;
        let mut s_term = r;
        let mut sin = r;
        let mut c_term = Dd::ONE;
        let mut cos = Dd::ONE;
        let mut n = 1.0;
        loop {
            c_term = -(c_term * r2) / (n * (n + 1.0));
            s_term = -(s_term * r2) / ((n + 1.0) * (n + 2.0));
            cos = cos + c_term;
            sin = sin + s_term;
            n += 2.0;
            if s_term.hi.abs() < 1e-36 && c_term.hi.abs() < 1e-36 {
                break;
            }
        }
        match (k as i64).rem_euclid(4) {
            0 => (sin, cos),
            1 => (cos, -sin),
            2 => (-sin, -cos),
            _ => (-cos, sin),
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::renorm(s1, s2 + t2)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        Dd::renorm(s1, s2 + self.lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    fn sub(self, b: f64) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        Dd::renorm(p1, p2 + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::renorm(p1, p2 + self.lo * b)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        Dd::renorm(q1, q2) + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::new(b)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };
    pub const ONE: DdComplex = DdComplex {
        re: Dd::ONE,
        im: Dd::ZERO,
    };

    pub fn new(re: Dd, im: Dd) -> Self {
        DdComplex { re, im }
    }

    pub fn real(x: f64) -> Self {
        DdComplex::new(Dd::new(x), Dd::ZERO)
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn recip(self) -> Self {
        let d = self.norm_sqr();
        DdComplex::new(self.re / d, -self.im / d)
    }

    pub fn scale(self, k: f64) -> Self {
        DdComplex::new(self.re * k, self.im * k)
    }

    pub fn exp(self) -> Self {
        let m = self.re.exp();
        if m.hi == 0.0 {
            return DdComplex::ZERO;
        }
        let (s, c) = self.im.sin_cos();
        DdComplex::new(m * c, m * s)
    }

    /// Principal branch.
    pub fn ln(self) -> Self {
        let modulus = self.norm_sqr().ln() * 0.5;
        let theta0 = self.im.to_f64().atan2(self.re.to_f64());
        // refine the argument: arg(z e^{-i theta0}) is tiny
        let (s, c) = Dd::new(theta0).sin_cos();
        let w = self * DdComplex::new(c, -s);
        let delta = w.im.to_f64() / w.re.to_f64();
        DdComplex::new(modulus, Dd::new(theta0) + delta)
    }

    pub fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = DdComplex::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl From<Complex64> for DdComplex {
    fn from(z: Complex64) -> Self {
        DdComplex::new(Dd::new(z.re), Dd::new(z.im))
    }
}

impl Neg for DdComplex {
    type Output = DdComplex;
    fn neg(self) -> Self {
        DdComplex::new(-self.re, -self.im)
    }
}

impl Add for DdComplex {
    type Output = DdComplex;
    fn add(self, b: Self) -> Self {
        DdComplex::new(self.re + b.re, self.im + b.im)
    }
}

impl Add<f64> for DdComplex {
    type Output = DdComplex;
    fn add(self, b: f64) -> Self {
        DdComplex::new(self.re + b, self.im)
    }
}

impl Sub for DdComplex {
    type Output = DdComplex;
    fn sub(self, b: Self) -> Self {
        DdComplex::new(self.re - b.re, self.im - b.im)
    }
}

impl Mul for DdComplex {
    type Output = DdComplex;
    fn mul(self, b: Self) -> Self {
        DdComplex::new(
            self.re * b.re - self.im * b.im,
            self.re * b.im + self.im * b.re,
        )
    }
}

impl Mul<f64> for DdComplex {
    type Output = DdComplex;
    fn mul(self, b: f64) -> Self {
        self.scale(b)
    }
}

impl Div for DdComplex {
    type Output = DdComplex;
    fn div(self, b: Self) -> Self {
        let d = b.norm_sqr();
        DdComplex::new(
            (self.re * b.re + self.im * b.im) / d,
            (self.im * b.re - self.re * b.im) / d,
        )
    }
}

//! Tanh-sinh (double exponential) quadrature.
//!
//! Nodes cluster double-exponentially at both endpoints, so integrable
//! endpoint singularities (logarithms, inverse square roots) converge
//! without special treatment. Node offsets from the endpoints are computed
//! directly rather than as `b - x` to keep full relative precision there.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    /// Difference between the last two refinement levels.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const MAX_LEVEL: u32 = 12;
const T_MAX: f64 = 6.5;

/// Integrates `f` over `[a, b]` until successive levels agree to
/// `tol * max(1, |I|)`.
pub fn tanh_sinh<T, F>(mut f: F, a: f64, b: f64, tol: f64) -> Quadrature<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    tanh_sinh_offsets(|x, _, _| f(x), a, b, tol)
}

/// Like [`tanh_sinh`], but `f(x, x - a, b - x)` also receives the exact
/// distances to both endpoints, for integrands singular where `b - x`
/// would cancel.
pub fn tanh_sinh_offsets<T, F>(mut f: F, a: f64, b: f64, tol: f64) -> Quadrature<T>
where
    T: QuadValue,
    F: FnMut(f64, f64, f64) -> T,
{
    if a == b {
        return Quadrature {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    if a > b {
        let q = integrate(|x, da, db| f(x, db, da), b, a, tol);
        return Quadrature {
            value: q.value * -1.0,
            ..q
        };
    }
    integrate(f, a, b, tol)
}

fn integrate<T, F>(mut f: F, a: f64, b: f64, tol: f64) -> Quadrature<T>
where
    T: QuadValue,
    F: FnMut(f64, f64, f64) -> T,
{
    let half = 0.5 * (b - a);
    let mid = a + half;
    let mut evaluations = 1;
    let mut sum = node_pair_center(&mut f, mid, half) * FRAC_PI_2;

    let mut node_pair = |t: f64| -> T {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        let delta = 2.0 * e / (1.0 + e);
        let weight = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let offset = half * delta;
        if offset == 0.0 {
            return T::zero();
        }
        let mut acc = T::zero();
        for (x, da, db) in [
            (a + offset, offset, 2.0 * half - offset),
            (b - offset, 2.0 * half - offset, offset),
        ] {
            evaluations += 1;
            let v = f(x.clamp(a, b), da, db);
            if v.is_finite_value() {
                acc = acc + v * weight;
            }
        }
        acc
    };

    let mut h = 1.0;
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        sum = sum + node_pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * (h * half);
    let mut error = f64::INFINITY;
    let mut converged = false;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            sum = sum + node_pair(k as f64 * h);
            k += 2;
        }
        let next = sum * (h * half);
        error = (next - estimate).magnitude();
        estimate = next;
        if error <= tol * estimate.magnitude().max(1.0) {
            converged = true;
            break;
        }
    }
    Quadrature {
        value: estimate,
        error,
        evaluations,
        converged,
    }
}

fn node_pair_center<T: QuadValue, F: FnMut(f64, f64, f64) -> T>(
    f: &mut F,
    mid: f64,
    half: f64,
) -> T {
    let v = f(mid, half, half);
    if v.is_finite_value() {
        v
    } else {
        T::zero()
    }
}

/// Integrates over `[a, ∞)` through `x = a + s / (1 - s)`.
pub fn tanh_sinh_half_line<F>(mut f: F, a: f64, tol: f64) -> Quadrature<f64>
where
    F: FnMut(f64) -> f64,
{
    tanh_sinh(
        |s: f64| {
            let one_minus = 1.0 - s;
            f(a + s / one_minus) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        tol,
    )
}

//! Special functions that the catalog closed forms need.

use num_complex::Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series for `x < a + 1`, Lentz continued fraction for `Q` otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_p requires a > 0");
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Lower incomplete gamma `γ(a, x) = ∫_0^x t^{a-1} e^{-t} dt`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // avoid Γ(a) * P(a, x) rounding for small x
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum * (a * x.ln() - x).exp()
    } else {
        ln_gamma(a).exp() * (1.0 - gamma_q_fraction(a, x))
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// `e^z E1(z)` for complex `z` off the negative real axis.
pub fn e1_scaled(z: Complex64) -> Complex64 {
    if z.norm() <= 2.0 {
        // E1(z) = -γ - ln z - Σ_{k≥1} (-z)^k / (k k!)
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..200 {
            term *= -z / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.norm() < EPS * sum.norm().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - z.ln() - sum) * z.exp()
    } else {
        // E1(z) e^z = 1 / (z + 1 - 1² / (z + 3 - 2² / (z + 5 - ...)))
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -((i * i) as f64);
            b += 2.0;
            d = an * d + b;
            if d.norm() < tiny {
                d = Complex64::new(tiny, 0.0);
            }
            c = b + an / c;
            if c.norm() < tiny {
                c = Complex64::new(tiny, 0.0);
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).norm() < EPS {
                break;
            }
        }
        h
    }
}

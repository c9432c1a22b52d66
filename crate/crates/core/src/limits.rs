//! Limiting expected Euler characteristic curves.
//!
//! For the uniform density on a unit-volume convex body the limit is
//! `e^{−Λ} P_d(Λ)`. A general bounded density `f` gives
//! `χ̄_F(Λ) = −∫ f̂′(y) χ̄_U(Λy) dy`, evaluated here by quadrature against the
//! excess-mass derivative or by Monte-Carlo as `E[χ̄_U(Λ f(X))]`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{DensityModel, Estimate, ExcessDerivative, ModelSpec};
use crate::ecc::LambdaCurve;
use crate::error::{invalid, Error, Result};
use crate::format::format_float;
use crate::numerics::fd::central_derivative;
use crate::numerics::quad::{tanh_sinh_half_line, tanh_sinh_offsets};
use crate::numerics::special::lower_gamma;
use crate::rng::stream;

/// Relative tolerance handed to tanh-sinh for the transform integral.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// `P` in `χ̄_U(Λ) = e^{−Λ} P(Λ)`, coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformPolynomial {
    coeffs: Vec<f64>,
}

impl UniformPolynomial {
    pub fn for_dim(d: usize) -> Result<Self> {
        let coeffs = match d {
            1 => vec![1.0],
            2 => vec![1.0, -1.0],
            3 => vec![1.0, -3.0, 3.0 * PI * PI / 32.0],
            _ => {
                return Err(Error::Unsupported(format!(
                    "uniform limit curve in dimension {d} (known for d = 1, 2, 3)"
                )))
            }
        };
        Ok(Self { coeffs })
    }

    /// Arbitrary polynomial with constant term 1.
    pub fn custom(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.first() != Some(&1.0) {
            return Err(invalid("polynomial must have constant term 1"));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `P^{(j)}(0) = j! p_j`.
    pub fn derivative_at_zero(&self, j: usize) -> f64 {
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        self.coeffs.get(j).map_or(0.0, |c| c * fact)
    }

    /// `e^{−Λ} P(Λ)` for any real `Λ`, with the value at 0 exactly 1.
    pub fn eecc(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        (-lambda).exp() * self.eval(lambda)
    }
}

pub fn uniform_eecc(d: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(UniformPolynomial::for_dim(d)?.eecc(lambda))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("Λ must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

fn check_model_dim(model: &DensityModel, d: usize) -> Result<()> {
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: d,
        });
    }
    Ok(())
}

/// Closed-form limit curve of a catalog model.
///
/// `normal1d` has no elementary form; its integral is evaluated after the
/// substitution `y = e^{−u²/2}/√(2π)`, which removes the endpoint singularity.
pub fn closed_form_eecc(model: &DensityModel, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(match *model {
        DensityModel::UniformBox { dim, .. } => UniformPolynomial::for_dim(dim)?.eecc(lambda * model.sup()),
        DensityModel::Exp1d => -(-lambda).exp_m1() / lambda,
        DensityModel::Normal1d => normal1d_eecc(lambda)?,
        DensityModel::Normal2d => (-lambda / TAU).exp(),
        DensityModel::ExpLaplace2d => {
            let x = lambda / TAU;
            -(-x).exp_m1() / x
        }
        DensityModel::Student2d { dof } => {
            let n = f64::from(dof);
            let b = n / (n + 2.0);
            let x = lambda / TAU;
            // γ(1+b,x) = bγ(b,x) − x^b e^{−x} turns the tabulated difference
            // into a sum of positive terms
            b * (1.0 - b) * x.powf(-b) * lower_gamma(b, x) + b * (-x).exp()
        }
        DensityModel::CubicExp3d => cubicexp3d_eecc(lambda / (4.0 * PI)),
    })
}

fn normal1d_eecc(lambda: f64) -> Result<f64> {
    let ymax = 1.0 / TAU.sqrt();
    let q = tanh_sinh_half_line(
        |u| {
            let w = (-0.5 * u * u).exp();
            2.0 * ymax * w * (-lambda * ymax * w).exp()
        },
        0.0,
        1e-14,
    );
    if !q.converged {
        return Err(Error::Internal(format!("normal1d integral stalled at Λ = {lambda}")));
    }
    Ok(q.value)
}

/// `(1/X)[2c − 2 + e^{−X}(2 − 2c + (3 − 2c)X − cX²)]` with `c = 3π²/32`.
fn cubicexp3d_eecc(x: f64) -> f64 {
    let c = 3.0 * PI * PI / 32.0;
    let (a, b, q) = (2.0 - 2.0 * c, 3.0 - 2.0 * c, -c);
    if x < 1e-3 {
        // Taylor series: coefficient of X^{k−1} is a(−1)^k/k! + b(−1)^{k−1}/(k−1)! + q(−1)^k/(k−2)!
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 1..=7i32 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let fact = |m: i32| (1..=m).map(f64::from).product::<f64>();
            let mut coef = a * sign / fact(k) - b * sign / fact(k - 1);
            if k >= 2 {
                coef += q * sign / fact(k - 2);
            }
            sum += coef * pow;
            pow *= x;
        }
        return sum;
    }
    (2.0 * c - 2.0 + (-x).exp() * (a + b * x + q * x * x)) / x
}

/// `−∫ ac(y) χ̄_U(Λy) dy + Σ a_j χ̄_U(Λ y_j)` for any real `Λ`.
pub fn eecc_from_derivative(der: &ExcessDerivative, poly: &UniformPolynomial, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(1.0);
    }
    der.pair(|y| poly.eecc(lambda * y), QUADRATURE_TOL)
}

pub fn eecc_quadrature(model: &DensityModel, d: usize, lambda: f64) -> Result<f64> {
    check_model_dim(model, d)?;
    check_lambda(lambda)?;
    let poly = UniformPolynomial::for_dim(d)?;
    eecc_from_derivative(&model.excess_derivative()?, &poly, lambda)
}

/// Sample mean of `χ̄_U(Λ f(X_i))` over `m` draws.
pub fn eecc_montecarlo<R: Rng + ?Sized>(
    model: &DensityModel,
    d: usize,
    lambda: f64,
    m: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_model_dim(model, d)?;
    check_lambda(lambda)?;
    if m == 0 {
        return Err(invalid("Monte-Carlo needs at least one draw"));
    }
    if lambda == 0.0 {
        return Ok(Estimate {
            value: 1.0,
            stderr: 0.0,
        });
    }
    let poly = UniformPolynomial::for_dim(d)?;
    let cloud = model.sample(rng, m);
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, x) in cloud.points().enumerate() {
        let v = poly.eecc(lambda * model.pdf(x)?);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if m > 1 { m2 / (m - 1) as f64 } else { 0.0 };
    Ok(Estimate {
        value: mean,
        stderr: (var / m as f64).sqrt(),
    })
}

/// `‖f̂′ − ĝ′‖₁`, the bound on `sup_Λ |χ̄_F − χ̄_G|`.
pub fn stability_bound(f: &ExcessDerivative, g: &ExcessDerivative) -> Result<f64> {
    let diff = |y: f64, bf: f64, bg: f64| f.ac_at(y, bf) - g.ac_at(y, bg);
    let (lo_top, hi_top) = (f.ymax.min(g.ymax), f.ymax.max(g.ymax));
    let mut cuts = vec![0.0];
    // split at sign changes of the difference so the integrand is smooth
    const PROBES: usize = 4000;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..PROBES {
        let y = lo_top * i as f64 / PROBES as f64;
        let v = diff(y, f.ymax - y, g.ymax - y);
        if let Some((py, pv)) = prev {
            if pv * v < 0.0 {
                let (mut a, mut b) = (py, y);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    let vm = diff(mid, f.ymax - mid, g.ymax - mid);
                    if (vm < 0.0) == (pv < 0.0) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                cuts.push(0.5 * (a + b));
            }
        }
        prev = Some((y, v));
    }
    cuts.push(lo_top);
    if hi_top > lo_top {
        cuts.push(hi_top);
    }
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let q = tanh_sinh_offsets(
            |y, _, below_b| diff(y, f.ymax - b + below_b, g.ymax - b + below_b).abs(),
            a,
            b,
            1e-12,
        );
        if !q.converged && q.error > 1e-9 {
            return Err(Error::Internal(format!(
                "L1 distance on [{a}, {b}] stalled at error {:e}",
                q.error
            )));
        }
        total += q.value;
    }
    let same = |x: f64, y: f64| (x - y).abs() <= 1e-14 * x.abs().max(y.abs());
    let mut matched = vec![false; g.atoms.len()];
    for a in &f.atoms {
        match g.atoms.iter().position(|b| same(a.location, b.location)) {
            Some(j) => {
                matched[j] = true;
                total += (a.mass - g.atoms[j].mass).abs();
            }
            None => total += a.mass.abs(),
        }
    }
    for (b, used) in g.atoms.iter().zip(matched) {
        if !used {
            total += b.mass.abs();
        }
    }
    Ok(total)
}

/// Both sides of `(−1)^k ∫ y^k f̂′ = (−1)^{k−1} χ̄^{(k)}(0) / Σ_i C(k,i)(−1)^i P^{(k−i)}(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialValueCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Finite-difference estimate of `χ̄^{(k)}(0)`.
    pub derivative: f64,
    pub denominator: f64,
    pub residual: f64,
}

pub const FD_STEP: f64 = 1e-2;

pub fn initial_value_check(der: &ExcessDerivative, poly: &UniformPolynomial, k: usize) -> Result<InitialValueCheck> {
    if k > 3 {
        return Err(invalid(format!("initial values are checked for k ≤ 3, got {k}")));
    }
    let binom = |n: usize, i: usize| -> f64 { (0..i).map(|j| (n - j) as f64 / (j + 1) as f64).product() };
    let denominator: f64 = (0..=k)
        .map(|i| binom(k, i) * if i % 2 == 0 { 1.0 } else { -1.0 } * poly.derivative_at_zero(k - i))
        .sum();
    if denominator == 0.0 {
        return Err(Error::DegenerateDenominator {
            k,
            coeffs: poly.coeffs().to_vec(),
        });
    }
    let sign_k = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // ∫ y^k f̂′ is minus the pairing of −f̂′ with y^k
    let lhs = -sign_k * der.pair(|y| y.powi(k as i32), QUADRATURE_TOL)?;
    let derivative = if k == 0 {
        eecc_from_derivative(der, poly, 0.0)?
    } else {
        let mut failure = None;
        let d = central_derivative(
            |l| match eecc_from_derivative(der, poly, l) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            k,
            FD_STEP,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        d
    };
    let rhs = -sign_k * derivative / denominator;
    Ok(InitialValueCheck {
        k,
        lhs,
        rhs,
        derivative,
        denominator,
        residual: (lhs - rhs).abs(),
    })
}

pub fn initial_value_residual(model: &DensityModel, d: usize, k: usize) -> Result<InitialValueCheck> {
    check_model_dim(model, d)?;
    initial_value_check(&model.excess_derivative()?, &UniformPolynomial::for_dim(d)?, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed-form",
            Self::Quadrature => "quadrature",
            Self::MonteCarlo => "monte-carlo",
        }
    }
}

/// Limit curve tabulated on a Λ grid, with how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitCurve {
    pub model: DensityModel,
    pub dim: usize,
    pub provenance: Provenance,
    pub curve: LambdaCurve,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct LimitCurveJson<'a> {
    provenance: Provenance,
    model: ModelSpec,
    dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    lambda: &'a [f64],
    value: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<&'a [f64]>,
}

impl LimitCurve {
    /// Evaluates the limit curve on `lambdas`. Monte-Carlo uses `m` draws
    /// per grid point with substream `(seed, i)` for the `i`-th point.
    pub fn evaluate(
        model: &DensityModel,
        d: usize,
        provenance: Provenance,
        lambdas: &[f64],
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        check_model_dim(model, d)?;
        let results: Vec<Result<(f64, f64)>> = lambdas
            .par_iter()
            .enumerate()
            .map(|(i, &l)| match provenance {
                Provenance::ClosedForm => closed_form_eecc(model, l).map(|v| (v, 0.0)),
                Provenance::Quadrature => eecc_quadrature(model, d, l).map(|v| (v, 0.0)),
                Provenance::MonteCarlo => {
                    eecc_montecarlo(model, d, l, m, &mut stream(seed, i as u64)).map(|e| (e.value, e.stderr))
                }
            })
            .collect();
        let mut values = Vec::with_capacity(lambdas.len());
        let mut errs = Vec::with_capacity(lambdas.len());
        for r in results {
            let (v, s) = r?;
            values.push(v);
            errs.push(s);
        }
        let mc = provenance == Provenance::MonteCarlo;
        Ok(Self {
            model: *model,
            dim: d,
            provenance,
            curve: LambdaCurve::new(lambdas.to_vec(), values, mc.then_some(errs))?,
            samples: mc.then_some(m),
            seed: mc.then_some(seed),
        })
    }

    /// `lambda,value[,stderr],provenance`; the stderr column only for
    /// Monte-Carlo curves.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let tag = self.provenance.as_str();
        let c = &self.curve;
        match &c.stderr {
            Some(se) => {
                writeln!(w, "lambda,value,stderr,provenance")?;
                for ((l, v), s) in c.lambdas.iter().zip(&c.values).zip(se) {
                    writeln!(w, "{},{},{},{tag}", format_float(*l), format_float(*v), format_float(*s))?;
                }
            }
            None => {
                writeln!(w, "lambda,value,provenance")?;
                for i in 0..c.len() {
                    writeln!(w, "{},{},{tag}", format_float(c.lambdas[i]), format_float(c.values[i]))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LimitCurveJson {
            provenance: self.provenance,
            model: self.model.to_spec(),
            dim: self.dim,
            quadrature_tolerance: (self.provenance == Provenance::Quadrature).then_some(QUADRATURE_TOL),
            samples: self.samples,
            seed: self.seed,
            lambda: &self.curve.lambdas,
            value: &self.curve.values,
            stderr: self.curve.stderr.as_deref(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

//! Catalog of bounded densities with samplers and analytic excess masses.
//!
//! The excess mass of `f` at level `t` is `f̂(t) = P(f(X) ≥ t)` for `X ~ f`.
//! Its distributional derivative splits into an absolutely continuous part
//! and finitely many atoms (level sets of positive measure).

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::format_float;
use crate::geometry::PointCloud;
use crate::numerics::quad::{tanh_sinh_half_line, tanh_sinh_offsets};
use crate::numerics::special::erf;

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

pub const MAX_STUDENT_DOF: u32 = 100;

/// One line per catalog entry, for help texts.
pub const CATALOG_HELP: &[&str] = &[
    "uniform-box(s=<side>,d=1|2|3)  uniform on [0,s]^d, s > 0",
    "exp1d                          e^{-x} on x >= 0",
    "normal1d                       standard normal, d = 1",
    "normal2d                       standard normal, d = 2",
    "explaplace2d                   e^{-|x|}/(2 pi), d = 2",
    "student2d(n=1..100)            bivariate t with n degrees of freedom",
    "cubicexp3d                     e^{-|x|^3/3}/(4 pi), d = 3",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityModel {
    UniformBox { side: f64, dim: usize },
    Exp1d,
    Normal1d,
    Normal2d,
    ExpLaplace2d,
    Student2d { dof: u32 },
    CubicExp3d,
}

/// Serialized form `{ "name": ..., "dim": ..., "params": {...} }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl DensityModel {
    pub fn uniform_box(side: f64, dim: usize) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(invalid(format!("uniform-box side must be positive, got {side}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Unsupported(format!("uniform-box in dimension {dim}")));
        }
        Ok(Self::UniformBox { side, dim })
    }

    pub fn student2d(dof: u32) -> Result<Self> {
        if !(1..=MAX_STUDENT_DOF).contains(&dof) {
            return Err(invalid(format!(
                "student2d degrees of freedom must be in 1..={MAX_STUDENT_DOF}, got {dof}"
            )));
        }
        Ok(Self::Student2d { dof })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformBox { .. } => "uniform-box",
            Self::Exp1d => "exp1d",
            Self::Normal1d => "normal1d",
            Self::Normal2d => "normal2d",
            Self::ExpLaplace2d => "explaplace2d",
            Self::Student2d { .. } => "student2d",
            Self::CubicExp3d => "cubicexp3d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UniformBox { dim, .. } => *dim,
            Self::Exp1d | Self::Normal1d => 1,
            Self::Normal2d | Self::ExpLaplace2d | Self::Student2d { .. } => 2,
            Self::CubicExp3d => 3,
        }
    }

    /// `‖f‖∞`, attained at the origin (or on the whole box).
    pub fn sup(&self) -> f64 {
        match self {
            Self::UniformBox { side, dim } => side.powi(-(*dim as i32)),
            Self::Exp1d => 1.0,
            Self::Normal1d => 1.0 / TAU.sqrt(),
            Self::Normal2d | Self::ExpLaplace2d | Self::Student2d { .. } => 1.0 / TAU,
            Self::CubicExp3d => 1.0 / (4.0 * PI),
        }
    }

    /// Parses `name` or `name(key=value,...)`. `dim` fills in the dimension
    /// of `uniform-box` and is checked against fixed-dimension models.
    pub fn parse(spec: &str, dim: Option<usize>) -> Result<Self> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(open) => {
                let inner = spec[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| invalid(format!("missing `)` in model spec `{spec}`")))?;
                (spec[..open].trim(), inner)
            }
            None => (spec, ""),
        };
        let mut params = BTreeMap::new();
        for kv in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad number `{}` for `{}`", v.trim(), k.trim())))?;
            params.insert(k.trim().to_string(), v);
        }
        Self::from_spec(&ModelSpec {
            name: name.to_string(),
            dim,
            params,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let mut params = spec.params.clone();
        let mut take = |key: &str| params.remove(key);
        let model = match spec.name.as_str() {
            "uniform-box" => {
                let side = take("s").unwrap_or(1.0);
                let from_param = take("d").map(|d| d as usize);
                let dim = match (from_param, spec.dim) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::DimensionMismatch {
                            expected: b,
                            found: a,
                        })
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => return Err(invalid("uniform-box needs a dimension")),
                };
                Self::uniform_box(side, dim)?
            }
            "exp1d" => Self::Exp1d,
            "normal1d" => Self::Normal1d,
            "normal2d" => Self::Normal2d,
            "explaplace2d" => Self::ExpLaplace2d,
            "student2d" => {
                let n = take("n").ok_or_else(|| invalid("student2d needs n"))?;
                if n.fract() != 0.0 || n < 1.0 {
                    return Err(invalid(format!("student2d n must be a positive integer, got {n}")));
                }
                Self::student2d(n.min(f64::from(u32::MAX)) as u32)?
            }
            "cubicexp3d" => Self::CubicExp3d,
            other => return Err(invalid(format!("unknown model `{other}`"))),
        };
        if let Some(extra) = params.keys().next() {
            return Err(invalid(format!("unknown parameter `{extra}` for {}", model.name())));
        }
        if let Some(d) = spec.dim {
            if d != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: model.dim(),
                });
            }
        }
        Ok(model)
    }

    pub fn to_spec(&self) -> ModelSpec {
        let mut params = BTreeMap::new();
        match self {
            Self::UniformBox { side, .. } => {
                params.insert("s".to_string(), *side);
            }
            Self::Student2d { dof } => {
                params.insert("n".to_string(), f64::from(*dof));
            }
            _ => {}
        }
        ModelSpec {
            name: self.name().to_string(),
            dim: Some(self.dim()),
            params,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.pdf_unchecked(x))
    }

    fn pdf_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Self::UniformBox { side, .. } => {
                if x.iter().all(|&c| (0.0..=*side).contains(&c)) {
                    self.sup()
                } else {
                    0.0
                }
            }
            Self::Exp1d => {
                if x[0] >= 0.0 {
                    (-x[0]).exp()
                } else {
                    0.0
                }
            }
            _ => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                self.radial_profile_sq(r2)
            }
        }
    }

    /// Radial profile `ρ` of a rotation-invariant model as a function of `|x|²`.
    fn radial_profile_sq(&self, r2: f64) -> f64 {
        match self {
            Self::Normal1d => (-0.5 * r2).exp() / TAU.sqrt(),
            Self::Normal2d => (-0.5 * r2).exp() / TAU,
            Self::ExpLaplace2d => (-r2.sqrt()).exp() / TAU,
            Self::Student2d { dof } => {
                let n = f64::from(*dof);
                (1.0 + r2 / n).powf(-(n + 2.0) / 2.0) / TAU
            }
            Self::CubicExp3d => (-(r2 * r2.sqrt()) / 3.0).exp() / (4.0 * PI),
            Self::UniformBox { .. } | Self::Exp1d => unreachable!("not rotation invariant"),
        }
    }

    /// Draws `m` independent points.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> PointCloud {
        let d = self.dim();
        let mut coords = Vec::with_capacity(m * d);
        for _ in 0..m {
            self.draw(rng, &mut coords);
        }
        PointCloud::new(d, coords).expect("sampler produces finite points")
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Self::UniformBox { side, dim } => {
                for _ in 0..*dim {
                    out.push(side * rng.random::<f64>());
                }
            }
            Self::Exp1d => out.push(-tail(rng).ln()),
            Self::Normal1d => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(sign * half_normal_quantile(rng.random::<f64>()));
            }
            Self::Normal2d => {
                let r = (-2.0 * tail(rng).ln()).sqrt();
                push_direction(rng, r, 2, out);
            }
            Self::ExpLaplace2d => {
                let r = gamma2_tail_inverse(tail(rng));
                push_direction(rng, r, 2, out);
            }
            Self::Student2d { dof } => {
                let n = f64::from(*dof);
                let r = (n * (tail(rng).powf(-2.0 / n) - 1.0)).sqrt();
                push_direction(rng, r, 2, out);
            }
            Self::CubicExp3d => {
                let r = (-3.0 * tail(rng).ln()).cbrt();
                push_direction(rng, r, 3, out);
            }
        }
    }

    /// Points of a Poisson process with intensity `n f`.
    pub fn poisson_sample<R: Rng + ?Sized>(&self, rng: &mut R, n: f64) -> Result<PointCloud> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid(format!("Poisson intensity must be positive, got {n}")));
        }
        let count = Poisson::new(n)
            .map_err(|e| invalid(format!("Poisson intensity {n}: {e}")))?
            .sample(rng);
        Ok(self.sample(rng, count as usize))
    }

    /// `f̂(t) = P(f(X) ≥ t)`.
    pub fn excess_mass(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t > self.sup() {
            return 0.0;
        }
        match self {
            Self::UniformBox { .. } => 1.0,
            Self::Exp1d => 1.0 - t,
            Self::Normal1d => erf((-(TAU * t * t).ln()).max(0.0).sqrt() / SQRT_2),
            Self::Normal2d => 1.0 - TAU * t,
            Self::ExpLaplace2d => {
                let u = TAU * t;
                1.0 + u * (u.ln() - 1.0)
            }
            Self::Student2d { dof } => {
                let n = f64::from(*dof);
                1.0 - (TAU * t).powf(n / (n + 2.0))
            }
            Self::CubicExp3d => 1.0 - 4.0 * PI * t,
        }
    }

    /// Fraction of `m` fresh samples with `f(X) ≥ t`.
    pub fn excess_mass_empirical<R: Rng + ?Sized>(&self, t: f64, m: usize, rng: &mut R) -> Result<Estimate> {
        if m == 0 {
            return Err(invalid("empirical excess mass needs at least one sample"));
        }
        let d = self.dim();
        let mut buf = Vec::with_capacity(d);
        let mut hits = 0usize;
        for _ in 0..m {
            buf.clear();
            self.draw(rng, &mut buf);
            if self.pdf_unchecked(&buf) >= t {
                hits += 1;
            }
        }
        let p = hits as f64 / m as f64;
        Ok(Estimate {
            value: p,
            stderr: (p * (1.0 - p) / m as f64).sqrt(),
        })
    }

    pub fn excess_derivative(&self) -> Result<ExcessDerivative> {
        let ymax = self.sup();
        let (ac, atoms) = match self {
            Self::UniformBox { .. } => (AcPart::Zero, vec![Atom { location: ymax, mass: 1.0 }]),
            Self::Exp1d => (AcPart::Constant(-1.0), vec![]),
            Self::Normal1d => (AcPart::Normal1d, vec![]),
            Self::Normal2d => (AcPart::Constant(-TAU), vec![]),
            Self::ExpLaplace2d => (AcPart::LogTwoPi, vec![]),
            Self::Student2d { dof } => (AcPart::Student2d(f64::from(*dof)), vec![]),
            Self::CubicExp3d => (AcPart::Constant(-4.0 * PI), vec![]),
        };
        Ok(ExcessDerivative { ymax, ac, atoms })
    }

    /// `‖f‖_{k+1}^{k+1} = ∫ f^{k+1}`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        let k = f64::from(k);
        Ok(match self {
            Self::UniformBox { .. } => self.sup().powf(k),
            Self::Exp1d => 1.0 / (k + 1.0),
            Self::Normal1d => TAU.powf(-k / 2.0) / (k + 1.0).sqrt(),
            Self::Normal2d | Self::CubicExp3d => self.sup().powf(k) / (k + 1.0),
            Self::ExpLaplace2d => TAU.powf(-k) / ((k + 1.0) * (k + 1.0)),
            Self::Student2d { dof } => {
                let n = f64::from(*dof);
                TAU.powf(-k) * n / ((n + 2.0) * (k + 1.0) - 2.0)
            }
        })
    }

    /// `∫ f^{k+1}` by quadrature over the radial profile.
    pub fn moment_quadrature(&self, k: u32) -> Result<f64> {
        let p = f64::from(k) + 1.0;
        let (shell, profile): (f64, Box<dyn Fn(f64) -> f64>) = match self {
            Self::UniformBox { .. } => return Ok(self.sup().powf(p - 1.0)),
            Self::Exp1d => (1.0, Box::new(|u: f64| (-u).exp())),
            _ => {
                let d = self.dim();
                // surface area of the unit sphere in R^d
                let area = match d {
                    1 => 2.0,
                    2 => TAU,
                    _ => 4.0 * PI,
                };
                let model = *self;
                (area, Box::new(move |u: f64| model.radial_profile_sq(u * u)))
            }
        };
        let d = self.dim() as i32;
        let q = tanh_sinh_half_line(|u| shell * profile(u).powf(p) * u.powi(d - 1), 0.0, 1e-13);
        if !q.converged || !q.value.is_finite() {
            return Err(Error::Internal(format!("moment quadrature for k = {k} did not converge")));
        }
        Ok(q.value)
    }
}

impl fmt::Display for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniformBox { side, dim } => {
                write!(f, "uniform-box(s={},d={dim})", format_float(*side))
            }
            Self::Student2d { dof } => write!(f, "student2d(n={dof})"),
            other => f.write_str(other.name()),
        }
    }
}

/// `1 − U` for uniform `U`, in `(0, 1]` so that its logarithm is finite.
fn tail<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn push_direction<R: Rng + ?Sized>(rng: &mut R, r: f64, d: usize, out: &mut Vec<f64>) {
    if d == 2 {
        let phi = TAU * rng.random::<f64>();
        out.push(r * phi.cos());
        out.push(r * phi.sin());
    } else {
        let z = 2.0 * rng.random::<f64>() - 1.0;
        let phi = TAU * rng.random::<f64>();
        let s = (1.0 - z * z).max(0.0).sqrt();
        out.push(r * s * phi.cos());
        out.push(r * s * phi.sin());
        out.push(r * z);
    }
}

/// Solves `(1 + r) e^{-r} = q` for `r ≥ 0`, the radial quantile of
/// `e^{-|x|}/(2π)` in the plane, by safeguarded Newton iteration.
fn gamma2_tail_inverse(q: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    let target = q.ln();
    let g = |r: f64| (1.0 + r).ln() - r - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = g(r);
        if v > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let slope = -r / (1.0 + r);
        let mut next = if slope != 0.0 { r - v / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 1e-12 * r.max(1e-300) || hi - lo <= 1e-12 * hi {
            return next;
        }
        r = next;
    }
    r
}

/// Quantile of `|X|` for a standard normal `X`: solves `erf(a/√2) = p`.
fn half_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while erf(hi / SQRT_2) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 40.0 {
            return hi;
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = erf(a / SQRT_2) - p;
        if v < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let slope = (2.0 / PI).sqrt() * (-0.5 * a * a).exp();
        let mut next = a - v / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - a).abs() <= 1e-12 * a.max(1e-300) || hi - lo <= 1e-12 * hi {
            return next;
        }
        a = next;
    }
    a
}

/// Absolutely continuous part of `f̂′` on `(0, ymax)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AcPart {
    Zero,
    Constant(f64),
    /// `−2 / √(−ln(2π y²))`
    Normal1d,
    /// `2π ln(2π y)`
    LogTwoPi,
    /// `−(2π n/(n+2)) (2π y)^{−2/(n+2)}`
    Student2d(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Distributional derivative of an excess mass: `ac` on `(0, ymax)` plus
/// downward jumps `atoms`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcessDerivative {
    pub ymax: f64,
    pub ac: AcPart,
    pub atoms: Vec<Atom>,
}

impl ExcessDerivative {
    /// `ac(y)`, given also the distance `below = ymax − y` so that
    /// singularities at the top of the support keep full precision.
    pub fn ac_at(&self, y: f64, below: f64) -> f64 {
        if y <= 0.0 || below <= 0.0 {
            return 0.0;
        }
        match self.ac {
            AcPart::Zero => 0.0,
            AcPart::Constant(c) => c,
            AcPart::Normal1d => {
                // −ln(2π y²) = −2 ln(y / ymax) with ymax = 1/√(2π)
                let l = -2.0 * (-below / self.ymax).ln_1p();
                -2.0 / l.sqrt()
            }
            AcPart::LogTwoPi => TAU * (TAU * y).ln(),
            AcPart::Student2d(n) => -(TAU * n / (n + 2.0)) * (TAU * y).powf(-2.0 / (n + 2.0)),
        }
    }

    pub fn ac(&self, y: f64) -> f64 {
        self.ac_at(y, self.ymax - y)
    }

    /// `−∫ ac(y) g(y) dy + Σ a_j g(y_j)`, the pairing of `−f̂′` with `g`.
    pub fn pair<G: FnMut(f64) -> f64>(&self, mut g: G, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        if self.ac != AcPart::Zero {
            let q = tanh_sinh_offsets(|y, _, below| -self.ac_at(y, below) * g(y), 0.0, self.ymax, tol);
            if !q.converged {
                return Err(Error::Internal(format!(
                    "quadrature against f̂′ stalled at error {:e}",
                    q.error
                )));
            }
            total += q.value;
        }
        for a in &self.atoms {
            total += a.mass * g(a.location);
        }
        Ok(total)
    }

    /// `−∫ ac + Σ a_j`, which equals 1 for a probability density.
    pub fn total_mass(&self) -> Result<f64> {
        self.pair(|_| 1.0, 1e-13)
    }

    /// `f̂(t) = 1 + ∫_0^t ac − Σ_{y_j < t} a_j`, rebuilt from the derivative.
    pub fn excess_mass(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(1.0);
        }
        let top = t.min(self.ymax);
        let mut v = 1.0;
        if self.ac != AcPart::Zero {
            let ymax = self.ymax;
            let q = tanh_sinh_offsets(|y, _, b| self.ac_at(y, ymax - top + b), 0.0, top, 1e-13);
            v += q.value;
        }
        for a in &self.atoms {
            if a.location < t {
                v -= a.mass;
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn catalog() -> Vec<DensityModel> {
        vec![
            DensityModel::uniform_box(1.0, 1).unwrap(),
            DensityModel::uniform_box(2.0, 2).unwrap(),
            DensityModel::uniform_box(0.5, 3).unwrap(),
            DensityModel::Exp1d,
            DensityModel::Normal1d,
            DensityModel::Normal2d,
            DensityModel::ExpLaplace2d,
            DensityModel::student2d(1).unwrap(),
            DensityModel::student2d(2).unwrap(),
            DensityModel::student2d(5).unwrap(),
            DensityModel::student2d(100).unwrap(),
            DensityModel::CubicExp3d,
        ]
    }

    #[test]
    fn pdf_values() {
        assert!((DensityModel::Normal2d.pdf(&[0.0, 0.0]).unwrap() - 0.159_154_943_091_895_34).abs() < 1e-16);
        assert_eq!(DensityModel::Exp1d.pdf(&[0.0]).unwrap(), 1.0);
        let st = DensityModel::student2d(2).unwrap();
        assert_eq!(st.pdf(&[0.0, 0.0]).unwrap(), 1.0 / TAU);
        assert!(matches!(
            DensityModel::Normal2d.pdf(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn parse_round_trip() {
        for m in catalog() {
            let text = m.to_string();
            assert_eq!(DensityModel::parse(&text, None).unwrap(), m, "{text}");
            let json = serde_json::to_string(&m.to_spec()).unwrap();
            let spec: ModelSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(DensityModel::from_spec(&spec).unwrap(), m);
        }
        assert_eq!(
            DensityModel::parse("uniform-box(s=1)", Some(2)).unwrap(),
            DensityModel::UniformBox { side: 1.0, dim: 2 }
        );
        for bad in ["student2d(n=0)", "student2d(n=101)", "student2d(n=2.5)", "normal2d(x=1)", "nope", "uniform-box(s=1"] {
            assert!(DensityModel::parse(bad, Some(2)).is_err(), "{bad}");
        }
        assert!(DensityModel::parse("normal2d", Some(1)).is_err());
    }

    #[test]
    fn json_spec_shape() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{ "name": "student2d", "dim": 2, "params": { "n": 5 } }"#).unwrap();
        assert_eq!(DensityModel::from_spec(&spec).unwrap(), DensityModel::Student2d { dof: 5 });
    }

    #[test]
    fn pdf_bounded_by_sup() {
        let mut rng = stream(1, 0);
        for m in catalog() {
            let d = m.dim();
            for _ in 0..20_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let v = m.pdf(&x).unwrap();
                assert!(v >= 0.0 && v <= m.sup() + 1e-12, "{m}");
            }
        }
    }

    #[test]
    fn excess_mass_examples() {
        let u = DensityModel::uniform_box(1.0, 2).unwrap();
        assert_eq!(u.excess_mass(0.5), 1.0);
        assert_eq!(u.excess_mass(1.5), 0.0);
        assert_eq!(DensityModel::Exp1d.excess_mass(0.25), 0.75);
        assert!((DensityModel::Normal2d.excess_mass(1.0 / (4.0 * PI)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn excess_mass_monotone_with_endpoints() {
        for m in catalog() {
            assert_eq!(m.excess_mass(0.0), 1.0);
            assert_eq!(m.excess_mass(m.sup() * 1.000_001), 0.0);
            let mut prev = 1.0;
            for i in 0..=1000 {
                let v = m.excess_mass(m.sup() * i as f64 / 1000.0);
                assert!(v <= prev + 1e-15, "{m}");
                prev = v;
            }
        }
    }

    #[test]
    fn derivative_mass_and_reconstruction() {
        for m in catalog() {
            let der = m.excess_derivative().unwrap();
            assert!((der.total_mass().unwrap() - 1.0).abs() < 1e-9, "{m}");
            for i in 1..20 {
                let t = m.sup() * i as f64 / 20.0;
                let rebuilt = der.excess_mass(t).unwrap();
                assert!((rebuilt - m.excess_mass(t)).abs() < 1e-8, "{m} t={t}");
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let u = DensityModel::uniform_box(1.0, 1).unwrap().excess_derivative().unwrap();
        assert_eq!(u.atoms, vec![Atom { location: 1.0, mass: 1.0 }]);
        assert_eq!(u.ac, AcPart::Zero);
        let e = DensityModel::ExpLaplace2d.excess_derivative().unwrap();
        assert!(e.atoms.is_empty());
        assert!((e.ac(0.1) - TAU * (TAU * 0.1f64).ln()).abs() < 1e-15);
        assert_eq!(DensityModel::Exp1d.excess_derivative().unwrap().ac(0.3), -1.0);
    }

    #[test]
    fn moments_match_examples_and_quadrature() {
        assert!((DensityModel::Exp1d.moment(1).unwrap() - 0.5).abs() < 1e-16);
        assert_eq!(DensityModel::uniform_box(1.0, 3).unwrap().moment(4).unwrap(), 1.0);
        assert!((DensityModel::Normal2d.moment(1).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        for m in catalog() {
            for k in 0..4 {
                let exact = m.moment(k).unwrap();
                let quad = m.moment_quadrature(k).unwrap();
                assert!((exact - quad).abs() < 1e-10 * exact.max(1.0), "{m} k={k}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn moment_identity_with_sign_flip() {
        for m in catalog() {
            let der = m.excess_derivative().unwrap();
            for k in 0..4 {
                let lhs = der.pair(|y| y.powi(k as i32), 1e-13).unwrap();
                assert!((lhs - m.moment(k).unwrap()).abs() < 1e-8, "{m} k={k}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_sized() {
        for m in catalog() {
            let a = m.sample(&mut stream(7, 2), 50);
            let b = m.sample(&mut stream(7, 2), 50);
            assert_eq!(a, b);
            assert_eq!(a.len(), 50);
            assert_eq!(a.dim(), m.dim());
            assert!(m.sample(&mut stream(7, 2), 0).is_empty());
        }
    }

    #[test]
    fn poisson_requires_positive_intensity() {
        assert!(DensityModel::Normal2d.poisson_sample(&mut stream(1, 1), 0.0).is_err());
    }

    #[test]
    fn empirical_excess_mass_edges() {
        let mut rng = stream(2, 0);
        for m in catalog() {
            assert_eq!(m.excess_mass_empirical(0.0, 100, &mut rng).unwrap().value, 1.0);
            assert_eq!(m.excess_mass_empirical(m.sup() * 1.01, 100, &mut rng).unwrap().value, 0.0);
        }
    }

    #[test]
    fn samplers_agree_with_excess_mass() {
        for (i, m) in catalog().into_iter().enumerate() {
            let mut rng = stream(11, i as u64);
            for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let t = frac * m.sup();
                let est = m.excess_mass_empirical(t, 40_000, &mut rng).unwrap();
                let exact = m.excess_mass(t);
                let se = (exact * (1.0 - exact) / 40_000.0).sqrt().max(1e-9);
                assert!((est.value - exact).abs() < 4.5 * se, "{m} t={t}: {} vs {exact}", est.value);
            }
        }
    }

    #[test]
    fn radial_quantiles_invert_their_cdfs() {
        for q in [1.0, 0.9, 0.5, 1e-3, 1e-12, 1e-300] {
            let r: f64 = gamma2_tail_inverse(q);
            assert!(((1.0 + r).ln() - r - q.ln()).abs() < 1e-11 * q.ln().abs().max(1.0), "q={q}");
        }
        for p in [0.0, 0.1, 0.5, 0.99, 1.0 - 1e-12] {
            let a = half_normal_quantile(p);
            assert!((erf(a / SQRT_2) - p).abs() < 1e-12, "p={p}");
        }
    }
}

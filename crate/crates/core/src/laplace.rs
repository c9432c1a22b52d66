//! Numerical inverse Laplace transforms and recovery of excess masses from
//! limit curves.
//!
//! In dimension one `f̂ = 1 − L⁻¹{χ̄(s)/s}`; in dimension two
//! `f̂ = L⁻¹{1/s − A(s)/s²}` with `A(s) = ∫₀^s χ̄`. Both are evaluated with the
//! Fixed Talbot contour in double-double arithmetic.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densities::{Atom, DensityModel, ExcessDerivative};
use crate::ecc::{unit_ball_volume, LambdaCurve};
use crate::error::{invalid, Error, Result};
use crate::format::format_float;
use crate::limits::UniformPolynomial;
use crate::numerics::dd::{Dd, DdComplex};
use crate::numerics::quad::{tanh_sinh, tanh_sinh_offsets};
use crate::numerics::special::{e1_scaled, EULER_GAMMA};

pub const DEFAULT_NODES: usize = 64;
pub const MIN_NODES: usize = 16;
/// Drop of `f̂` across one grid cell that is reported as an atom.
pub const ATOM_JUMP: f64 = 0.05;

type CustomFn = Arc<dyn Fn(DdComplex) -> DdComplex + Send + Sync>;

/// Elementary factor of a delayed group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    /// `c s^m`
    Power { c: f64, m: i32 },
    /// `c s^m ln s`
    LogPower { c: f64, m: i32 },
    /// `c s^m e^{as} E₁(as)`, evaluated in `f64`
    E1 { c: f64, a: f64, m: i32 },
}

impl Term {
    fn shift(self, by: i32) -> Term {
        match self {
            Term::Power { c, m } => Term::Power { c, m: m + by },
            Term::LogPower { c, m } => Term::LogPower { c, m: m + by },
            Term::E1 { c, a, m } => Term::E1 { c, a, m: m + by },
        }
    }

    fn scale(self, k: f64) -> Term {
        match self {
            Term::Power { c, m } => Term::Power { c: c * k, m },
            Term::LogPower { c, m } => Term::LogPower { c: c * k, m },
            Term::E1 { c, a, m } => Term::E1 { c: c * k, a, m },
        }
    }

    fn eval(&self, s: DdComplex) -> DdComplex {
        match *self {
            Term::Power { c, m } => s.powi(m) * c,
            Term::LogPower { c, m } => s.powi(m) * s.ln() * c,
            Term::E1 { c, a, m } => {
                let e = e1_scaled(s.to_c64() * a);
                s.powi(m) * DdComplex::from(e) * c
            }
        }
    }
}

#[derive(Clone)]
enum GroupBody {
    Terms(Vec<Term>),
    Custom(CustomFn),
}

/// `e^{−delay·s} G(s)`.
#[derive(Clone)]
pub struct DelayGroup {
    delay: f64,
    body: GroupBody,
}

impl DelayGroup {
    pub fn terms(delay: f64, terms: Vec<Term>) -> Self {
        DelayGroup {
            delay,
            body: GroupBody::Terms(terms),
        }
    }

    pub fn custom<F>(delay: f64, f: F) -> Self
    where
        F: Fn(DdComplex) -> DdComplex + Send + Sync + 'static,
    {
        DelayGroup {
            delay,
            body: GroupBody::Custom(Arc::new(f)),
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    fn eval(&self, s: DdComplex) -> DdComplex {
        match &self.body {
            GroupBody::Terms(ts) => ts.iter().fold(DdComplex::ZERO, |acc, t| acc + t.eval(s)),
            GroupBody::Custom(f) => f(s),
        }
    }

    fn map_terms(&self, f: impl Fn(Term) -> Term, custom: impl Fn(CustomFn) -> CustomFn) -> Self {
        let body = match &self.body {
            GroupBody::Terms(ts) => GroupBody::Terms(ts.iter().map(|t| f(*t)).collect()),
            GroupBody::Custom(g) => GroupBody::Custom(custom(g.clone())),
        };
        DelayGroup {
            delay: self.delay,
            body,
        }
    }
}

/// Function of a complex variable written as `Σ_j e^{−τ_j s} G_j(s)`. The
/// delays are kept apart so that each `G_j` is inverted at `t − τ_j`.
#[derive(Clone)]
pub struct AnalyticCurve {
    tag: String,
    groups: Vec<DelayGroup>,
}

impl fmt::Debug for AnalyticCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticCurve")
            .field("tag", &self.tag)
            .field("groups", &self.groups.len())
            .finish()
    }
}

impl AnalyticCurve {
    pub fn new(tag: impl Into<String>, groups: Vec<DelayGroup>) -> Self {
        AnalyticCurve {
            tag: tag.into(),
            groups,
        }
    }

    pub fn from_fn<F>(tag: impl Into<String>, f: F) -> Self
    where
        F: Fn(DdComplex) -> DdComplex + Send + Sync + 'static,
    {
        Self::new(tag, vec![DelayGroup::custom(0.0, f)])
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn groups(&self) -> &[DelayGroup] {
        &self.groups
    }

    pub fn eval(&self, s: DdComplex) -> DdComplex {
        self.groups.iter().fold(DdComplex::ZERO, |acc, g| {
            let v = g.eval(s);
            if g.delay == 0.0 {
                acc + v
            } else {
                acc + (s * -g.delay).exp() * v
            }
        })
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(DdComplex::real(x)).re.to_f64()
    }

    /// `F(s)/s`.
    fn over_s(&self) -> AnalyticCurve {
        let groups = self
            .groups
            .iter()
            .map(|g| {
                g.map_terms(
                    |t| t.shift(-1),
                    |f| Arc::new(move |s: DdComplex| f(s) * s.recip()),
                )
            })
            .collect();
        AnalyticCurve::new(format!("({})/s", self.tag), groups)
    }
}

/// `Σ c Λ^k e^{−aΛ}` with `k ≥ −1`, `a ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpLaurent {
    pub terms: Vec<ExpLaurentTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpLaurentTerm {
    pub c: f64,
    pub k: i32,
    #[serde(default)]
    pub a: f64,
}

impl ExpLaurent {
    pub fn new(terms: Vec<ExpLaurentTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.c.is_finite() && t.a.is_finite() && t.a >= 0.0) || t.k < -1 {
                return Err(invalid(format!(
                    "term {}·Λ^{}·e^(−{}Λ) needs finite c, k ≥ −1 and a ≥ 0",
                    t.c, t.k, t.a
                )));
            }
        }
        let poles: f64 = terms.iter().filter(|t| t.k == -1).map(|t| t.c).sum();
        let scale: f64 = terms.iter().filter(|t| t.k == -1).map(|t| t.c.abs()).sum();
        if poles.abs() > 1e-12 * scale.max(1.0) {
            return Err(invalid("coefficients of Λ⁻¹ terms must sum to zero"));
        }
        Ok(ExpLaurent { terms })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ExpLaurent = serde_json::from_str(text)?;
        Self::new(raw.terms)
    }

    /// Value as `Λ → 0`: `Σ_{k=0} c − Σ_{k=−1} c a`.
    pub fn value_at_zero(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t.k {
                0 => t.c,
                -1 => -t.c * t.a,
                _ => 0.0,
            })
            .sum()
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return self.value_at_zero();
        }
        // group the poles so the cancellation at small Λ stays accurate
        let mut total = 0.0;
        for t in &self.terms {
            if t.k == -1 {
                total += t.c * ((-t.a * lambda).exp_m1() / lambda);
            } else {
                total += t.c * lambda.powi(t.k) * (-t.a * lambda).exp();
            }
        }
        total
    }

    pub fn to_curve(&self, tag: impl Into<String>) -> AnalyticCurve {
        let mut groups: Vec<(f64, Vec<Term>)> = Vec::new();
        for t in &self.terms {
            push_term(&mut groups, t.a, Term::Power { c: t.c, m: t.k });
        }
        build(tag, groups)
    }

    /// `1/s − A(s)/s²` with `A(s) = ∫₀^s` of the curve.
    fn d2_transform(&self, tag: String) -> AnalyticCurve {
        let mut groups: Vec<(f64, Vec<Term>)> = vec![(0.0, vec![Term::Power { c: 1.0, m: -1 }])];
        let mut anti = |delay: f64, t: Term| push_term(&mut groups, delay, t.shift(-2).scale(-1.0));
        for t in &self.terms {
            let (c, k, a) = (t.c, t.k, t.a);
            if k == -1 {
                if a > 0.0 {
                    // −c [γ + ln a + ln s + E₁(as)]
                    anti(0.0, Term::Power { c: -c * (EULER_GAMMA + a.ln()), m: 0 });
                    anti(0.0, Term::LogPower { c: -c, m: 0 });
                    anti(a, Term::E1 { c: -c, a, m: 0 });
                }
            } else if a == 0.0 {
                anti(0.0, Term::Power { c: c / f64::from(k + 1), m: k + 1 });
            } else {
                // c k!/a^{k+1} [1 − e^{−as} Σ_{i≤k} (as)^i / i!]
                let fact: f64 = (1..=k).map(f64::from).product();
                let lead = c * fact / a.powi(k + 1);
                anti(0.0, Term::Power { c: lead, m: 0 });
                let mut coef = lead;
                for i in 0..=k {
                    if i > 0 {
                        coef *= a / f64::from(i);
                    }
                    anti(a, Term::Power { c: -coef, m: i });
                }
            }
        }
        build(tag, groups)
    }
}

fn push_term(groups: &mut Vec<(f64, Vec<Term>)>, delay: f64, term: Term) {
    let slot = match groups.iter().position(|(d, _)| *d == delay) {
        Some(i) => i,
        None => {
            groups.push((delay, Vec::new()));
            groups.len() - 1
        }
    };
    let terms = &mut groups[slot].1;
    let same = |t: &Term| match (*t, term) {
        (Term::Power { m, .. }, Term::Power { m: n, .. }) => m == n,
        (Term::LogPower { m, .. }, Term::LogPower { m: n, .. }) => m == n,
        (Term::E1 { m, a, .. }, Term::E1 { m: n, a: b, .. }) => m == n && a == b,
        _ => false,
    };
    match terms.iter_mut().find(|t| same(t)) {
        Some(Term::Power { c, .. }) | Some(Term::LogPower { c, .. }) | Some(Term::E1 { c, .. }) => {
            let add = match term {
                Term::Power { c, .. } | Term::LogPower { c, .. } | Term::E1 { c, .. } => c,
            };
            *c += add;
        }
        None => terms.push(term),
    }
}

fn build(tag: impl Into<String>, mut groups: Vec<(f64, Vec<Term>)>) -> AnalyticCurve {
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let groups = groups
        .into_iter()
        .filter_map(|(d, ts)| {
            let ts: Vec<Term> = ts
                .into_iter()
                .filter(|t| !matches!(t, Term::Power { c, .. } | Term::LogPower { c, .. } | Term::E1 { c, .. } if *c == 0.0))
                .collect();
            (!ts.is_empty()).then(|| DelayGroup::terms(d, ts))
        })
        .collect();
    AnalyticCurve::new(tag, groups)
}

/// Catalog limit curve as an exponential-Laurent sum.
pub fn catalog_expansion(model: &DensityModel) -> Result<ExpLaurent> {
    let t = |c: f64, k: i32, a: f64| ExpLaurentTerm { c, k, a };
    let tau = 2.0 * PI;
    let terms = match *model {
        DensityModel::UniformBox { dim, .. } => {
            let a = model.sup();
            let poly = UniformPolynomial::for_dim(dim)?;
            poly.coeffs()
                .iter()
                .enumerate()
                .map(|(i, p)| t(p * a.powi(i as i32), i as i32, a))
                .collect()
        }
        DensityModel::Exp1d => vec![t(1.0, -1, 0.0), t(-1.0, -1, 1.0)],
        DensityModel::Normal2d => vec![t(1.0, 0, 1.0 / tau)],
        DensityModel::ExpLaplace2d => vec![t(tau, -1, 0.0), t(-tau, -1, 1.0 / tau)],
        DensityModel::CubicExp3d => {
            let c = 3.0 * PI * PI / 32.0;
            let q = 4.0 * PI;
            vec![
                t(q * (2.0 * c - 2.0), -1, 0.0),
                t(q * (2.0 - 2.0 * c), -1, 1.0 / q),
                t(3.0 - 2.0 * c, 0, 1.0 / q),
                t(-c / q, 1, 1.0 / q),
            ]
        }
        DensityModel::Normal1d => return Err(Error::ClosedFormUnavailable("normal1d".into())),
        DensityModel::Student2d { .. } => {
            return Err(Error::Unsupported(
                "student2d limit curve on complex arguments (incomplete gamma of complex argument)".into(),
            ))
        }
    };
    ExpLaurent::new(terms)
}

pub fn catalog_curve(model: &DensityModel) -> Result<AnalyticCurve> {
    Ok(catalog_expansion(model)?.to_curve(model.to_string()))
}

/// Fixed Talbot approximation of `L⁻¹{F}(t)` with `nodes` contour points.
pub fn talbot_inverse(curve: &AnalyticCurve, t: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("inversion time must be positive, got {t}")));
    }
    if nodes < MIN_NODES {
        return Err(invalid(format!("Talbot needs at least {MIN_NODES} nodes, got {nodes}")));
    }
    let mut total = 0.0;
    for g in &curve.groups {
        let local = t - g.delay;
        if local <= 0.0 {
            continue;
        }
        total += talbot_group(|s| g.eval(s), local, nodes)?.to_f64();
    }
    Ok(total)
}

fn talbot_group(g: impl Fn(DdComplex) -> DdComplex, t: f64, m: usize) -> Result<Dd> {
    let r = Dd::new(2.0 * m as f64) / (5.0 * t);
    let check = |v: DdComplex, node: usize, s: DdComplex| -> Result<DdComplex> {
        if v.is_finite() {
            Ok(v)
        } else {
            let z = s.to_c64();
            Err(Error::Inversion {
                node,
                msg: format!("non-finite value at s = {}{:+}i", z.re, z.im),
            })
        }
    };
    let s0 = DdComplex::new(r, Dd::ZERO);
    let f0 = check(g(s0), 0, s0)?;
    let mut sum = f0.re * (r * t).exp() * 0.5;
    for k in 1..m {
        let theta = Dd::PI * (k as f64) / (m as f64);
        let (sin, cos) = theta.sin_cos();
        let cot = cos / sin;
        let s = DdComplex::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let v = check(g(s), k, s)?;
        let w = DdComplex::new(s.re * t, s.im * t).exp() * v * DdComplex::new(Dd::ONE, sigma);
        sum = sum + w.re;
    }
    let out = r / m as f64 * sum;
    if !out.is_finite() {
        return Err(Error::Inversion {
            node: m,
            msg: "contour sum overflowed".into(),
        });
    }
    Ok(out)
}

/// Values on an increasing level grid, with atoms found along the way.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub atoms: Vec<Atom>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(invalid("grid and values must be non-empty and of equal length"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("grid must be strictly increasing"));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("grid function contains non-finite numbers"));
        }
        Ok(GridFunction {
            grid,
            values,
            atoms: Vec::new(),
        })
    }

    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&y| f(y)).collect();
        Self::new(grid, values)
    }

    /// Linear interpolation, constant beyond the ends.
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.grid.len();
        if y <= self.grid[0] {
            return self.values[0];
        }
        if y >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.grid.partition_point(|&g| g <= y) - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let w = (y - x0) / (x1 - x0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,value")?;
        for (y, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{},{}", format_float(*y), format_float(*v))?;
        }
        for a in &self.atoms {
            writeln!(w, "# atom y={} mass={}", format_float(a.location), format_float(a.mass))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (mut grid, mut values, mut atoms) = (Vec::new(), Vec::new(), Vec::new());
        let mut header = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            let parse_err = |msg: String| Error::Parse { line: lineno, msg };
            if text.is_empty() {
                continue;
            }
            if let Some(rest) = text.strip_prefix("# atom") {
                let mut loc = None;
                let mut mass = None;
                for kv in rest.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(format!("bad atom field `{kv}`")))?;
                    let v: f64 = v.parse().map_err(|_| parse_err(format!("bad number `{v}`")))?;
                    match k {
                        "y" => loc = Some(v),
                        "mass" => mass = Some(v),
                        _ => return Err(parse_err(format!("unknown atom field `{k}`"))),
                    }
                }
                match (loc, mass) {
                    (Some(location), Some(mass)) => atoms.push(Atom { location, mass }),
                    _ => return Err(parse_err("atom needs y= and mass=".into())),
                }
                continue;
            }
            if text.starts_with('#') {
                continue;
            }
            if !header {
                if text.replace(' ', "") != "y,value" {
                    return Err(parse_err(format!("expected header `y,value`, found `{text}`")));
                }
                header = true;
                continue;
            }
            let (a, b) = text
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected two columns in `{text}`")))?;
            let y: f64 = a.trim().parse().map_err(|_| parse_err(format!("bad number `{a}`")))?;
            let v: f64 = b.trim().parse().map_err(|_| parse_err(format!("bad number `{b}`")))?;
            grid.push(y);
            values.push(v);
        }
        let mut gf = Self::new(grid, values)?;
        gf.atoms = atoms;
        Ok(gf)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("empty level grid"));
    }
    if grid.iter().any(|y| !(y.is_finite() && *y >= 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("level grid must be increasing, finite and non-negative"));
    }
    Ok(())
}

fn recover(grid: &[f64], excess: impl Fn(f64) -> Result<f64>) -> Result<GridFunction> {
    check_grid(grid)?;
    let values = grid
        .iter()
        .map(|&y| if y == 0.0 { Ok(1.0) } else { excess(y) })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = GridFunction::new(grid.to_vec(), values)?;
    out.atoms = detect_atoms(&out, &excess)?;
    Ok(out)
}

/// A drop larger than [`ATOM_JUMP`] across a cell is narrowed down by
/// bisection to the point where `f̂` jumps.
fn detect_atoms(gf: &GridFunction, excess: &impl Fn(f64) -> Result<f64>) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for i in 0..gf.grid.len() - 1 {
        if gf.values[i] - gf.values[i + 1] <= ATOM_JUMP {
            continue;
        }
        let (mut lo, mut hi) = (gf.grid[i], gf.grid[i + 1]);
        let (mut vlo, mut vhi) = (gf.values[i], gf.values[i + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let vm = excess(mid)?;
            if vlo - vm >= vm - vhi {
                hi = mid;
                vhi = vm;
            } else {
                lo = mid;
                vlo = vm;
            }
        }
        if vlo - vhi > ATOM_JUMP {
            atoms.push(Atom {
                location: hi,
                mass: vlo - vhi,
            });
        }
    }
    Ok(atoms)
}

/// `f̂(y) = 1 − L⁻¹{χ̄(s)/s}(y)` on `grid`.
pub fn invert_excess_1d(eecc: &AnalyticCurve, grid: &[f64], nodes: usize) -> Result<GridFunction> {
    let f = eecc.over_s();
    recover(grid, |y| Ok(1.0 - talbot_inverse(&f, y, nodes)?))
}

/// `f̂ = L⁻¹{1/s − A(s)/s²}` on `grid`, `A(s) = ∫₀^s χ̄`.
pub fn invert_excess_2d(eecc: &Eecc, grid: &[f64], nodes: usize) -> Result<GridFunction> {
    let f = eecc.d2_transform()?;
    recover(grid, |y| talbot_inverse(&f, y, nodes))
}

/// Limit curve handed to the inversions: an exponential-Laurent sum, whose
/// antiderivative is known in closed form, or an arbitrary analytic curve
/// without delays, integrated numerically along the segment `[0, s]`.
#[derive(Clone, Debug)]
pub enum Eecc {
    Expansion(ExpLaurent, String),
    Analytic(AnalyticCurve),
}

impl Eecc {
    pub fn catalog(model: &DensityModel) -> Result<Self> {
        Ok(Eecc::Expansion(catalog_expansion(model)?, model.to_string()))
    }

    pub fn curve(&self) -> AnalyticCurve {
        match self {
            Eecc::Expansion(e, tag) => e.to_curve(tag.clone()),
            Eecc::Analytic(c) => c.clone(),
        }
    }

    pub fn eval_real(&self, lambda: f64) -> f64 {
        match self {
            Eecc::Expansion(e, _) => e.eval(lambda),
            Eecc::Analytic(c) => c.eval_real(lambda),
        }
    }

    fn d2_transform(&self) -> Result<AnalyticCurve> {
        match self {
            Eecc::Expansion(e, tag) => Ok(e.d2_transform(format!("d=2 transform of {tag}"))),
            Eecc::Analytic(c) => {
                if c.groups.iter().any(|g| g.delay != 0.0) {
                    return Err(Error::Unsupported(
                        "numerical antiderivative of a delayed curve; supply an exponential-Laurent form".into(),
                    ));
                }
                let curve = c.clone();
                let tag = format!("d=2 transform of {}", c.tag);
                let g = DelayGroup::custom(0.0, move |s| {
                    let a = path_integral(&curve, s);
                    s.recip() - a * s.recip() * s.recip()
                });
                Ok(AnalyticCurve::new(tag, vec![g]))
            }
        }
    }
}

/// `∫₀^s F = s ∫₀¹ F(us) du` by tanh-sinh in `f64`.
fn path_integral(curve: &AnalyticCurve, s: DdComplex) -> DdComplex {
    let z = s.to_c64();
    let q = tanh_sinh(
        |u: f64| -> Complex64 { curve.eval(DdComplex::from(z * u)).to_c64() * z },
        0.0,
        1.0,
        1e-12,
    );
    DdComplex::from(q.value)
}

/// `μ(t) = |{f ≥ t}|` from the layer-cake relation `f̂′(t) = t μ′(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelMeasure {
    /// Cells `[y_i, y_{i+1}]` with the constant slope of `f̂` on each.
    knots: Vec<f64>,
    slopes: Vec<f64>,
    atoms: Vec<Atom>,
    ymax: f64,
}

impl LevelMeasure {
    /// Piecewise-linear reading of a tabulated excess mass. Recorded atoms
    /// are removed from the cell that contains them; whatever mass is left
    /// at the top of the grid becomes an atom there.
    pub fn from_grid(excess: &GridFunction) -> Result<Self> {
        let (grid, values) = (&excess.grid, &excess.values);
        if grid.len() < 2 || grid[0] < 0.0 {
            return Err(invalid("level measure needs a non-negative grid with at least two points"));
        }
        let mut slopes = Vec::with_capacity(grid.len() - 1);
        for i in 0..grid.len() - 1 {
            let inside: f64 = excess
                .atoms
                .iter()
                .filter(|a| a.location > grid[i] && a.location <= grid[i + 1])
                .map(|a| a.mass)
                .sum();
            let drop = values[i] - values[i + 1] - inside;
            if drop < -1e-6 {
                return Err(invalid(format!(
                    "excess mass increases by {:e} on [{}, {}]",
                    -drop, grid[i], grid[i + 1]
                )));
            }
            slopes.push(-drop.max(0.0) / (grid[i + 1] - grid[i]));
        }
        let ymax = *grid.last().expect("non-empty grid");
        let mut atoms = excess.atoms.clone();
        let top = *values.last().expect("non-empty grid");
        if top > 1e-12 {
            atoms.push(Atom {
                location: ymax,
                mass: top,
            });
        }
        Ok(LevelMeasure {
            knots: grid.clone(),
            slopes,
            atoms,
            ymax,
        })
    }

    /// Exact layer-cake integral of a catalog excess-mass derivative.
    pub fn from_derivative(der: &ExcessDerivative, grid: &[f64]) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid {
            if t.is_nan() || t <= 0.0 {
                return Err(invalid("level measure is evaluated at positive levels"));
            }
            let mut v = 0.0;
            if t < der.ymax {
                let ymax = der.ymax;
                let q = tanh_sinh_offsets(|y, _, below| -der.ac_at(y, below) / y, t, ymax, 1e-12);
                v += q.value;
            }
            v += der.atoms.iter().filter(|a| a.location >= t).map(|a| a.mass / a.location).sum::<f64>();
            values.push(v);
        }
        GridFunction::new(grid.to_vec(), values)
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t > self.ymax {
            return 0.0;
        }
        let mut v = 0.0;
        for (i, &m) in self.slopes.iter().enumerate() {
            let (a, b) = (self.knots[i].max(t), self.knots[i + 1]);
            if b <= a || m == 0.0 {
                continue;
            }
            if a <= 0.0 {
                return f64::INFINITY;
            }
            v -= m * (b / a).ln();
        }
        v + self
            .atoms
            .iter()
            .filter(|a| a.location >= t)
            .map(|a| a.mass / a.location)
            .sum::<f64>()
    }

    /// `μ` on the positive grid points.
    pub fn tabulate(&self) -> Result<GridFunction> {
        let grid: Vec<f64> = self.knots.iter().copied().filter(|&y| y > 0.0).collect();
        GridFunction::from_fn(grid, |t| self.eval(t))
    }
}

pub fn level_measure(excess: &GridFunction) -> Result<GridFunction> {
    LevelMeasure::from_grid(excess)?.tabulate()
}

/// Radially symmetric density `x ↦ ρ(|x|)` with a prescribed excess mass.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub rho: Vec<f64>,
}

impl RadialProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,rho")?;
        for (u, r) in self.radii.iter().zip(&self.rho) {
            writeln!(w, "{},{}", format_float(*u), format_float(*r))?;
        }
        Ok(())
    }

    /// Linear interpolation in `u`, zero beyond the last radius.
    pub fn eval(&self, u: f64) -> f64 {
        let n = self.radii.len();
        if u > self.radii[n - 1] {
            return 0.0;
        }
        let i = self.radii.partition_point(|&r| r <= u).clamp(1, n - 1) - 1;
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let w = ((u - r0) / (r1 - r0)).clamp(0.0, 1.0);
        self.rho[i] * (1.0 - w) + self.rho[i + 1] * w
    }
}

/// `ρ(u) = sup{t : μ(t) ≥ ω_d u^d}` on `radii`, or on a default grid
/// reaching the radius where `ρ` falls to `10⁻⁶·‖f‖∞`.
pub fn reconstruct_radial(excess: &GridFunction, d: usize, radii: Option<&[f64]>) -> Result<RadialProfile> {
    let omega = unit_ball_volume(d)?;
    let mu = LevelMeasure::from_grid(excess)?;
    let first = excess.grid.iter().copied().find(|&y| y > 0.0).unwrap_or(mu.ymax);
    if !mu.eval(first).is_finite() {
        return Err(Error::Reconstruction("level measure is infinite at a positive level".into()));
    }
    let radii = match radii {
        Some(r) => r.to_vec(),
        None => {
            let floor = (mu.ymax * 1e-6).max(first);
            let reach = (mu.eval(floor) / omega).powf(1.0 / d as f64);
            if !(reach.is_finite() && reach > 0.0) {
                return Err(Error::Reconstruction("cannot size the radius grid".into()));
            }
            // step just past the edge so a flat profile shows its drop
            let top = reach * 1.25;
            (0..=200).map(|i| top * i as f64 / 200.0).collect()
        }
    };
    let rho = radii
        .iter()
        .map(|&u| {
            let target = omega * u.powi(d as i32);
            generalized_inverse(&mu, target, first)
        })
        .collect();
    Ok(RadialProfile { dim: d, radii, rho })
}

fn generalized_inverse(mu: &LevelMeasure, target: f64, first: f64) -> f64 {
    if mu.eval(mu.ymax) >= target {
        return mu.ymax;
    }
    let mut lo = first.min(mu.ymax) * 1e-12;
    if mu.eval(lo) < target {
        return 0.0;
    }
    let mut hi = mu.ymax;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu.eval(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Excess mass of `x ↦ ρ(|x|)`: `∫_{ρ ≥ t} ρ`.
pub fn radial_excess_mass(profile: &RadialProfile, t: f64) -> f64 {
    let d = profile.dim as i32;
    let omega = unit_ball_volume(profile.dim).expect("dimension checked at construction");
    let area = omega * f64::from(d);
    // Gauss-Legendre with three points is exact for the cubic ρ(u) u^{d−1}
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut total = 0.0;
    for i in 0..profile.radii.len() - 1 {
        let (u0, u1) = (profile.radii[i], profile.radii[i + 1]);
        let (r0, r1) = (profile.rho[i], profile.rho[i + 1]);
        if r0 < t {
            break;
        }
        let cut = if r1 >= t { u1 } else { u0 + (r0 - t) / (r0 - r1) * (u1 - u0) };
        let half = 0.5 * (cut - u0);
        for (x, w) in X.iter().zip(W) {
            let u = u0 + half * (1.0 + x);
            let rho = r0 + (r1 - r0) * (u - u0) / (u1 - u0);
            total += w * half * rho * area * u.powi(d - 1);
        }
    }
    total
}

/// Rejects tabulated curves that look empirical: Monte-Carlo standard
/// errors, a value at `Λ = 0` other than 1, or wiggles that a smooth curve
/// could not produce on the given grid.
pub fn smoothness_precheck(curve: &LambdaCurve) -> Result<()> {
    if let Some(se) = &curve.stderr {
        if se.iter().any(|s| *s > 0.0) {
            return Err(Error::Precheck(
                "curve carries positive standard errors (empirical estimate)".into(),
            ));
        }
    }
    if curve.lambdas.first() == Some(&0.0) && (curve.values[0] - 1.0).abs() > 1e-9 {
        return Err(Error::Precheck(format!(
            "value at Λ = 0 is {} instead of 1",
            curve.values[0]
        )));
    }
    let (x, v) = (&curve.lambdas, &curve.values);
    if x.len() < 6 {
        return Err(Error::Precheck("need at least six grid points".into()));
    }
    let scale = v.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1e-300);
    // predict each interior value from two neighbours on each side; the
    // cubic through them misses a smooth curve by O(h⁴) and noise by O(σ)
    let mut worst = (0.0, 0usize);
    for i in 2..x.len() - 2 {
        let nodes = [i - 2, i - 1, i + 1, i + 2];
        let mut pred = 0.0;
        for &j in &nodes {
            let mut w = 1.0;
            for &k in &nodes {
                if k != j {
                    w *= (x[i] - x[k]) / (x[j] - x[k]);
                }
            }
            pred += w * v[j];
        }
        let err = (pred - v[i]).abs() / scale;
        if err > worst.0 {
            worst = (err, i);
        }
    }
    if worst.0 > 1e-5 {
        return Err(Error::Precheck(format!(
            "relative interpolation defect {:.2e} at Λ = {} exceeds 1e-5",
            worst.0, x[worst.1]
        )));
    }
    Ok(())
}

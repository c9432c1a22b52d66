//! Empirical Euler characteristic curves.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::format::format_float;
use crate::geometry::{alpha_filtration_2d, delaunay2d, miniball_of, PointCloud};

/// Largest cloud accepted by [`cech_chi_bruteforce`].
pub const BRUTEFORCE_MAX_POINTS: usize = 14;

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(std::f64::consts::PI),
        3 => Ok(4.0 * std::f64::consts::PI / 3.0),
        _ => Err(Error::Unsupported(format!("dimension {d}"))),
    }
}

/// Right-continuous integer step function of the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCurve {
    breakpoints: Vec<f64>,
    values: Vec<i64>,
}

impl StepCurve {
    pub fn new(breakpoints: Vec<f64>, values: Vec<i64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(invalid("step curve needs one more value than breakpoints"));
        }
        if breakpoints.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(invalid("breakpoints must be finite and non-negative"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        Ok(Self { breakpoints, values })
    }

    /// Builds the curve from its value at `r = 0` and jumps `(radius, delta)`.
    /// Jumps at equal radii are merged and zero net jumps dropped.
    pub fn from_jumps(initial: i64, mut jumps: Vec<(f64, i64)>) -> Self {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breakpoints = Vec::new();
        let mut values = vec![initial];
        let mut current = initial;
        let mut i = 0;
        while i < jumps.len() {
            let r = jumps[i].0;
            let mut delta = 0;
            while i < jumps.len() && jumps[i].0 == r {
                delta += jumps[i].1;
                i += 1;
            }
            if delta != 0 {
                current += delta;
                breakpoints.push(r);
                values.push(current);
            }
        }
        Self {
            breakpoints,
            values,
        }
    }

    pub fn constant(value: i64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Value at radius `r`; at a breakpoint this is the value after the jump.
    pub fn eval(&self, r: f64) -> i64 {
        self.values[self.breakpoints.partition_point(|&b| b <= r)]
    }

    pub fn initial(&self) -> i64 {
        self.values[0]
    }

    pub fn terminal(&self) -> i64 {
        *self.values.last().expect("non-empty values")
    }

    /// Rows `r,chi`: the value at `r = 0`, then one row per breakpoint.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,chi")?;
        writeln!(w, "0,{}", self.values[0])?;
        for (b, v) in self.breakpoints.iter().zip(&self.values[1..]) {
            if *b > 0.0 {
                writeln!(w, "{},{v}", format_float(*b))?;
            }
        }
        Ok(())
    }
}

/// Real-valued curve sampled on a grid of `Λ ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaCurve {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl LambdaCurve {
    pub fn new(lambdas: Vec<f64>, values: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if lambdas.len() != values.len() || stderr.as_ref().is_some_and(|s| s.len() != values.len()) {
            return Err(invalid("curve columns differ in length"));
        }
        if lambdas.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(invalid("curve contains non-finite numbers"));
        }
        if lambdas.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("Λ grid must be sorted"));
        }
        Ok(Self {
            lambdas,
            values,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match &self.stderr {
            Some(se) => {
                writeln!(w, "lambda,value,stderr")?;
                for ((l, v), s) in self.lambdas.iter().zip(&self.values).zip(se) {
                    writeln!(w, "{},{},{}", format_float(*l), format_float(*v), format_float(*s))?;
                }
            }
            None => {
                writeln!(w, "lambda,value")?;
                for (l, v) in self.lambdas.iter().zip(&self.values) {
                    writeln!(w, "{},{}", format_float(*l), format_float(*v))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a CSV with a header naming a `lambda` column and a `value` (or
    /// `mean`) column; a `stderr` column is picked up when present. Lines
    /// starting with `#` are ignored.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let (mut lambdas, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
        let mut cols = (0, 0, None);
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            let Some(names) = &header else {
                let names: Vec<String> = fields.iter().map(|s| s.to_ascii_lowercase()).collect();
                let find = |want: &[&str]| names.iter().position(|n| want.contains(&n.as_str()));
                let l = find(&["lambda"]).ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: "header has no `lambda` column".into(),
                })?;
                let v = find(&["value", "mean"]).ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: "header has no `value` or `mean` column".into(),
                })?;
                cols = (l, v, find(&["stderr"]));
                header = Some(names);
                continue;
            };
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                fields[k].parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("{e} in field `{}`", fields[k]),
                })
            };
            lambdas.push(num(cols.0)?);
            values.push(num(cols.1)?);
            if let Some(s) = cols.2 {
                stderr.push(num(s)?);
            }
        }
        if header.is_none() {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            });
        }
        let stderr = cols.2.map(|_| stderr);
        Self::new(lambdas, values, stderr)
    }
}

/// Euler characteristic of the Čech complex at radius `r`, by enumerating
/// every subset whose smallest enclosing ball has radius at most `r`.
pub fn cech_chi_bruteforce(cloud: &PointCloud, r: f64) -> Result<i64> {
    let n = cloud.len();
    if n > BRUTEFORCE_MAX_POINTS {
        return Err(Error::SizeLimit {
            n,
            max: BRUTEFORCE_MAX_POINTS,
        });
    }
    if r.is_nan() || r < 0.0 {
        return Err(invalid(format!("radius must be non-negative, got {r}")));
    }
    let points: Vec<&[f64]> = cloud.points().collect();
    // depth-first over subsets in increasing index order; a subset that
    // fails prunes all its supersets
    fn visit<'a>(points: &[&'a [f64]], subset: &mut Vec<&'a [f64]>, next: usize, r: f64) -> Result<i64> {
        let mut chi = 0;
        for i in next..points.len() {
            subset.push(points[i]);
            if miniball_of(subset)?.radius <= r {
                let sign = if subset.len() % 2 == 1 { 1 } else { -1 };
                chi += sign + visit(points, subset, i + 1, r)?;
            }
            subset.pop();
        }
        Ok(chi)
    }
    visit(&points, &mut Vec::with_capacity(n), 0, r)
}

/// ECC of points on a line: one component per gap wider than `2r`.
pub fn ecc_curve_1d(cloud: &PointCloud) -> Result<StepCurve> {
    if cloud.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: cloud.dim(),
        });
    }
    interval_curve(cloud.coords().to_vec())
}

fn interval_curve(mut xs: Vec<f64>) -> Result<StepCurve> {
    if xs.is_empty() {
        return Err(invalid("ECC of an empty cloud"));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let jumps = xs.windows(2).map(|w| (0.5 * (w[1] - w[0]), -1)).collect();
    Ok(StepCurve::from_jumps(xs.len() as i64, jumps))
}

/// ECC of a planar cloud through its alpha filtration. Collinear clouds are
/// reduced to coordinates along their common line.
pub fn ecc_curve_2d(cloud: &PointCloud) -> Result<StepCurve> {
    if cloud.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cloud.dim(),
        });
    }
    if cloud.is_empty() {
        return Err(invalid("ECC of an empty cloud"));
    }
    let tri = match delaunay2d(cloud) {
        Ok(t) => t,
        Err(Error::Degenerate(_)) => return interval_curve(line_coordinates(cloud)),
        Err(e) => return Err(e),
    };
    let complex = alpha_filtration_2d(&tri, cloud)?;
    let jumps = complex
        .simplices
        .iter()
        .filter(|s| s.dim > 0)
        .map(|s| (s.alpha, if s.dim == 1 { -1 } else { 1 }))
        .collect();
    Ok(StepCurve::from_jumps(tri.vertices.len() as i64, jumps))
}

/// Signed positions along the line through a collinear planar cloud.
fn line_coordinates(cloud: &PointCloud) -> Vec<f64> {
    let p0 = cloud.point(0);
    let far = cloud
        .points()
        .max_by(|a, b| sq_dist(a, p0).total_cmp(&sq_dist(b, p0)))
        .expect("non-empty cloud");
    let len = sq_dist(far, p0).sqrt();
    if len == 0.0 {
        return vec![0.0; cloud.len()];
    }
    let u = [(far[0] - p0[0]) / len, (far[1] - p0[1]) / len];
    cloud
        .points()
        .map(|p| (p[0] - p0[0]) * u[0] + (p[1] - p0[1]) * u[1])
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Empirical curve in the thermodynamic variable: `n⁻¹ χ(r(Λ))` with
/// `r(Λ) = (Λ / (n ω_d))^{1/d}`, pinned to 1 at `Λ = 0`.
pub fn ecc_in_lambda(step: &StepCurve, n: f64, d: usize, lambdas: &[f64]) -> Result<LambdaCurve> {
    if n.is_nan() || n <= 0.0 {
        return Err(invalid(format!("sample size must be positive, got {n}")));
    }
    let omega = unit_ball_volume(d)?;
    let mut values = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if l.is_nan() || l < 0.0 {
            return Err(invalid(format!("Λ must be non-negative, got {l}")));
        }
        values.push(if l == 0.0 {
            1.0
        } else {
            step.eval(radius_for_lambda(l, n, d, omega)) as f64 / n
        });
    }
    LambdaCurve::new(lambdas.to_vec(), values, None)
}

pub fn radius_for_lambda(lambda: f64, n: f64, d: usize, omega: f64) -> f64 {
    let base = lambda / (n * omega);
    match d {
        1 => base,
        2 => base.sqrt(),
        _ => base.powf(1.0 / d as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cloud1(xs: &[f64]) -> PointCloud {
        PointCloud::new(1, xs.to_vec()).unwrap()
    }

    fn cloud2(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_points(2, pts).unwrap()
    }

    #[test]
    fn bruteforce_small_cases() {
        assert_eq!(cech_chi_bruteforce(&cloud2(&[[3.0, 4.0]]), 0.0).unwrap(), 1);
        assert_eq!(cech_chi_bruteforce(&cloud2(&[[3.0, 4.0]]), 7.0).unwrap(), 1);
        let two = cloud2(&[[0.0, 0.0], [2.0, 0.0]]);
        assert_eq!(cech_chi_bruteforce(&two, 0.9).unwrap(), 2);
        assert_eq!(cech_chi_bruteforce(&two, 1.0).unwrap(), 1);
        let big = PointCloud::new(1, (0..15).map(f64::from).collect()).unwrap();
        assert!(matches!(cech_chi_bruteforce(&big, 1.0), Err(Error::SizeLimit { n: 15, .. })));
    }

    /// Counts connected components of the union of `[x - r, x + r]`.
    fn interval_union_components(xs: &[f64], r: f64) -> i64 {
        let mut ivs: Vec<(f64, f64)> = xs.iter().map(|&x| (x - r, x + r)).collect();
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut count = 0;
        let mut reach = f64::NEG_INFINITY;
        for (lo, hi) in ivs {
            if lo > reach {
                count += 1;
            }
            reach = reach.max(hi);
        }
        count
    }

    #[test]
    fn one_dimensional_examples() {
        let xs = [0.0, 1.0, 3.0];
        let c = ecc_curve_1d(&cloud1(&xs)).unwrap();
        assert_eq!(c.eval(0.6), 2);
        assert_eq!(interval_union_components(&xs, 0.6), 2);
        assert_eq!(c.eval(0.0), 3);
        assert_eq!(c.eval(1.5000001), 1);
        assert_eq!(c.breakpoints(), &[0.5, 1.0]);
        assert_eq!(c.eval(0.5), 2, "right-continuous at the breakpoint");
    }

    #[test]
    fn equilateral_triangle_curve() {
        let h = 3f64.sqrt() / 2.0;
        let c = cloud2(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]);
        let curve = ecc_curve_2d(&c).unwrap();
        // the three sides only agree to rounding, so the jump at 0.5 may be
        // split into nearby ones
        assert_eq!(curve.eval(0.5 - 1e-9), 3);
        assert_eq!(curve.eval(0.5 + 1e-9), 0);
        assert_eq!(curve.eval(1.0 / 3f64.sqrt() - 1e-9), 0);
        assert_eq!(curve.eval(1.0 / 3f64.sqrt() + 1e-9), 1);
        assert!(curve.breakpoints().iter().all(|b| (b - 0.5).abs() < 1e-15
            || (b - 1.0 / 3f64.sqrt()).abs() < 1e-15));
        for r in [0.3, 0.55, 0.6] {
            assert_eq!(curve.eval(r), cech_chi_bruteforce(&c, r).unwrap());
        }
    }

    #[test]
    fn single_point_and_collinear_clouds() {
        assert_eq!(ecc_curve_2d(&cloud2(&[[1.0, 1.0]])).unwrap(), StepCurve::constant(1));
        let line = cloud2(&[[0.0, 0.0], [1.0, 2.0], [3.0, 6.0], [1.0, 2.0]]);
        let curve = ecc_curve_2d(&line).unwrap();
        assert_eq!(curve.initial(), 3);
        assert_eq!(curve.terminal(), 1);
        for r in [0.1, 1.2, 2.3, 5.0] {
            assert_eq!(curve.eval(r), cech_chi_bruteforce(&line, r).unwrap(), "r = {r}");
        }
    }

    #[test]
    fn random_clouds_match_bruteforce_at_midpoints() {
        let mut rng = crate::rng::stream(99, 0);
        for _ in 0..20 {
            let pts: Vec<[f64; 2]> = (0..10).map(|_| [rng.random(), rng.random()]).collect();
            let c = cloud2(&pts);
            let curve = ecc_curve_2d(&c).unwrap();
            assert_eq!(curve.initial(), 10);
            assert_eq!(curve.terminal(), 1);
            let b = curve.breakpoints();
            let mut probes: Vec<f64> = b.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            probes.push(0.5 * b[0]);
            probes.push(b[b.len() - 1] * 1.01);
            for r in probes {
                assert_eq!(curve.eval(r), cech_chi_bruteforce(&c, r).unwrap());
            }
        }
    }

    #[test]
    fn lambda_rescaling() {
        let step = StepCurve::from_jumps(4, vec![(0.01, -1), (0.02, -2)]);
        let n = 1000.0;
        let curve = ecc_in_lambda(&step, n, 2, &[0.0, 2.0, std::f64::consts::PI]).unwrap();
        assert_eq!(curve.values[0], 1.0);
        let r = radius_for_lambda(std::f64::consts::PI, n, 2, std::f64::consts::PI);
        assert!((r - 0.031_622_776_601_683_8).abs() < 1e-15);
        assert_eq!(curve.values[2], step.eval(r) as f64 / n);
        assert!(ecc_in_lambda(&step, n, 2, &[-1.0]).is_err());
    }

    #[test]
    fn rescaling_matches_definition_on_random_probes() {
        let step = StepCurve::from_jumps(50, (1..50).map(|k| (k as f64 * 0.013, -1)).collect());
        let mut rng = crate::rng::stream(3, 3);
        for _ in 0..1000 {
            let l: f64 = rng.random_range(0.0..10.0);
            let d = rng.random_range(1..=2usize);
            let v = ecc_in_lambda(&step, 50.0, d, &[l]).unwrap().values[0];
            let omega = unit_ball_volume(d).unwrap();
            let expected = step.eval((l / (50.0 * omega)).powf(1.0 / d as f64)) as f64 / 50.0;
            assert_eq!(v, if l == 0.0 { 1.0 } else { expected });
        }
    }

    #[test]
    fn lambda_curve_csv_round_trip() {
        let c = LambdaCurve::new(vec![0.0, 0.5, 2.0], vec![1.0, 0.25, -1e-7], Some(vec![0.0, 0.1, 0.2]))
            .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,value,stderr\n0,1,0\n"));
        assert_eq!(LambdaCurve::read_csv(text.as_bytes()).unwrap(), c);
        let err = LambdaCurve::read_csv("lambda,value\n0,1\n1,oops\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn step_curve_csv() {
        let step = StepCurve::from_jumps(3, vec![(0.5, -1), (1.0, -1), (0.7, 1), (0.7, -1)]);
        let mut buf = Vec::new();
        step.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "r,chi\n0,3\n0.5,2\n1,1\n");
    }
}

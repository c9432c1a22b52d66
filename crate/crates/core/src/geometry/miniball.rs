//! Smallest enclosing ball by Welzl's move-to-front recursion.

use super::PointCloud;
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &[f64], slack: f64) -> bool {
        dist(&self.center, p) <= self.radius + slack
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn slack(radius: f64) -> f64 {
    1e-14 * (radius + 1.0)
}

/// Smallest closed ball containing every point of `cloud`.
pub fn miniball(cloud: &PointCloud) -> Result<Ball> {
    let points: Vec<&[f64]> = cloud.points().collect();
    miniball_of(&points)
}

/// Same as [`miniball`] for borrowed coordinate slices of equal length.
pub fn miniball_of(points: &[&[f64]]) -> Result<Ball> {
    let Some(first) = points.first() else {
        return Err(invalid("miniball of an empty point set"));
    };
    let dim = first.len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(invalid("points of mixed dimension"));
    }
    let mut list: Vec<&[f64]> = points.to_vec();
    let mut support = Vec::with_capacity(dim + 1);
    let end = list.len();
    Ok(mtf(&mut list, end, &mut support, dim))
}

fn mtf<'a>(list: &mut [&'a [f64]], end: usize, support: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    let mut ball = ball_from_support(support, dim);
    if support.len() == dim + 1 {
        return ball;
    }
    for i in 0..end {
        let p = list[i];
        if ball.radius >= 0.0 && ball.contains(p, slack(ball.radius)) {
            continue;
        }
        support.push(p);
        ball = mtf(list, i, support, dim);
        support.pop();
        list[..=i].rotate_right(1);
    }
    ball
}

/// Smallest ball with every support point on its boundary. An empty support
/// gives a ball of negative radius that contains nothing.
fn ball_from_support(support: &[&[f64]], dim: usize) -> Ball {
    match support.len() {
        0 => Ball {
            center: vec![0.0; dim],
            radius: -1.0,
        },
        1 => Ball {
            center: support[0].to_vec(),
            radius: 0.0,
        },
        _ => circumball(support).unwrap_or_else(|| degenerate_support(support, dim)),
    }
}

/// Ball through all points with center in their affine hull, or `None` when
/// the points are (numerically) affinely dependent.
fn circumball(support: &[&[f64]]) -> Option<Ball> {
    let p0 = support[0];
    let m = support.len() - 1;
    let v: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut g = vec![vec![0.0; m + 1]; m];
    for j in 0..m {
        for k in 0..m {
            g[j][k] = dot(&v[j], &v[k]);
        }
        g[j][m] = 0.5 * g[j][j];
    }
    let scale = (0..m).map(|j| g[j][j]).fold(0.0, f64::max);
    let lambda = solve(g, scale * 1e-12)?;
    let mut center = p0.to_vec();
    for (l, vj) in lambda.iter().zip(&v) {
        for (c, x) in center.iter_mut().zip(vj) {
            *c += l * x;
        }
    }
    let radius = support
        .iter()
        .map(|p| dist(&center, p))
        .fold(0.0, f64::max);
    Some(Ball { center, radius })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>, tiny: f64) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= tiny {
            return None;
        }
        a.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut().take(m - col - 1) {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..=m].iter_mut().zip(&pivot_row[col..=m]) {
                *x -= f * p;
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][m] - s) / a[row][row];
    }
    Some(x)
}

/// Affinely dependent support (only reachable through rounding): the
/// smallest ball spanned by a proper subset that still covers everything.
fn degenerate_support(support: &[&[f64]], dim: usize) -> Ball {
    let n = support.len();
    let mut best: Option<Ball> = None;
    for mask in 1u32..(1 << n) - 1 {
        let subset: Vec<&[f64]> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| support[i]).collect();
        let candidate = if subset.len() == 1 {
            ball_from_support(&subset, dim)
        } else {
            match circumball(&subset) {
                Some(b) => b,
                None => continue,
            }
        };
        let covers = support.iter().all(|p| candidate.contains(p, slack(candidate.radius) * 1e3));
        if covers && best.as_ref().is_none_or(|b| candidate.radius < b.radius) {
            best = Some(candidate);
        }
    }
    best.unwrap_or_else(|| {
        // farthest pair diameter always covers collinear supports
        let mut far = (support[0], support[1], 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let d = dist(support[i], support[j]);
                if d > far.2 {
                    far = (support[i], support[j], d);
                }
            }
        }
        let center: Vec<f64> = far.0.iter().zip(far.1).map(|(a, b)| 0.5 * (a + b)).collect();
        let radius = support.iter().map(|p| dist(&center, p)).fold(0.0, f64::max);
        Ball { center, radius }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ball(points: &[&[f64]]) -> Ball {
        miniball_of(points).unwrap()
    }

    #[test]
    fn single_point() {
        let b = ball(&[&[0.0, 0.0]]);
        assert_eq!(b.center, vec![0.0, 0.0]);
        assert_eq!(b.radius, 0.0);
    }

    #[test]
    fn right_triangle_uses_hypotenuse() {
        let b = ball(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        assert!((b.radius - 2f64.sqrt()).abs() < 1e-14);
        assert!((b.center[0] - 1.0).abs() < 1e-14 && (b.center[1] - 1.0).abs() < 1e-14);
    }

    /// Minimises the maximal distance over a grid of candidate centers,
    /// then refines the grid around the best one.
    fn grid_search_radius(points: &[[f64; 2]]) -> f64 {
        let far = |c: [f64; 2]| {
            points
                .iter()
                .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
                .fold(0.0, f64::max)
        };
        let (mut cx, mut cy, mut half) = (0.5, 0.5, 1.0);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, cx, cy);
            for i in -20..=20 {
                for j in -20..=20 {
                    let c = [cx + half * i as f64 / 20.0, cy + half * j as f64 / 20.0];
                    let r = far(c);
                    if r < best.0 {
                        best = (r, c[0], c[1]);
                    }
                }
            }
            (cx, cy) = (best.1, best.2);
            half *= 0.25;
        }
        far([cx, cy])
    }

    #[test]
    fn acute_triangle_matches_grid_oracle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]];
        let oracle = grid_search_radius(&pts);
        // golden: circumradius of the acute triangle, 1.06 / 1.8
        assert!((oracle - 0.588_888_888_888_888_9).abs() < 1e-9);
        let b = ball(&[&pts[0], &pts[1], &pts[2]]);
        assert!((b.radius - 0.588_888_888_888_888_9).abs() < 1e-14);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(miniball_of(&[]).is_err());
    }

    #[test]
    fn collinear_and_duplicate_points() {
        let b = ball(&[&[0.0, 0.0], &[1.0, 1.0], &[3.0, 3.0], &[1.0, 1.0]]);
        assert!((b.radius - 1.5 * 2f64.sqrt()).abs() < 1e-14);
        let b = ball(&[&[2.0], &[-1.0], &[0.5]]);
        assert!((b.radius - 1.5).abs() < 1e-15 && (b.center[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regular_tetrahedron() {
        let s = 1.0 / 2f64.sqrt();
        let b = ball(&[&[1.0, 0.0, -s], &[-1.0, 0.0, -s], &[0.0, 1.0, s], &[0.0, -1.0, s]]);
        // circumradius of a regular tetrahedron with edge 2 is √(3/2)
        assert!((b.radius - 1.5f64.sqrt()).abs() < 1e-14);
    }

    fn cloud_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
        (1usize..=3).prop_flat_map(|d| (Just(d), prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), 1..=6)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn encloses_and_is_minimal((dim, pts) in cloud_strategy()) {
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let b = ball(&refs);
            prop_assert_eq!(b.center.len(), dim);
            let eps = 1e-12 * (b.radius + 1.0);
            for p in &refs {
                prop_assert!(dist(&b.center, p) <= b.radius + eps);
            }
            // shrinking leaves a point outside: the ball is tight on some point
            let shrunk = b.radius * (1.0 - 1e-6);
            prop_assert!(b.radius == 0.0 || refs.iter().any(|p| dist(&b.center, p) > shrunk));
            // moving the center cannot shrink the ball
            for k in 0..20 {
                let t = k as f64 * 0.37;
                let probe: Vec<f64> = b.center.iter().enumerate()
                    .map(|(i, c)| c + 1e-3 * b.radius * (t + i as f64 * 1.3).sin())
                    .collect();
                let far = refs.iter().map(|p| dist(&probe, p)).fold(0.0, f64::max);
                prop_assert!(far >= b.radius * (1.0 - 1e-12));
            }
        }
    }
}

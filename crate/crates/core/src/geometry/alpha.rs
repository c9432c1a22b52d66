//! Alpha filtration of a planar Delaunay triangulation for equal-radius
//! disks: the subcomplex with values `≤ r` has the homotopy type of the union
//! of closed disks of radius `r`.

use super::delaunay::Triangulation2D;
use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    /// Cloud indices; length is `dim + 1`.
    pub vertices: Vec<usize>,
    pub dim: usize,
    /// Radius at which the simplex enters.
    pub alpha: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FilteredComplex {
    pub simplices: Vec<Simplex>,
}

impl FilteredComplex {
    /// `Σ (−1)^dim` over simplices with value `≤ r`.
    pub fn euler_characteristic(&self, r: f64) -> i64 {
        self.simplices
            .iter()
            .filter(|s| s.alpha <= r)
            .map(|s| if s.dim % 2 == 0 { 1 } else { -1 })
            .sum()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn circumradius(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let twice_area =
        super::predicates::orient2d([a[0], a[1]], [b[0], b[1]], [c[0], c[1]]).abs();
    dist(a, b) * dist(b, c) * dist(c, a) / (2.0 * twice_area)
}

/// Whether `c` lies strictly inside the circle with diameter `ab`.
fn encroaches(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    (a[0] - c[0]) * (b[0] - c[0]) + (a[1] - c[1]) * (b[1] - c[1]) < 0.0
}

pub fn alpha_filtration_2d(tri: &Triangulation2D, cloud: &PointCloud) -> Result<FilteredComplex> {
    if 3 * tri.triangles.len() != tri.edges.iter().map(|e| e.triangles.len()).sum::<usize>() {
        return Err(Error::Internal("edge/triangle incidence is inconsistent".into()));
    }
    let mut simplices = Vec::with_capacity(tri.vertices.len() + tri.edges.len() + tri.triangles.len());
    for &v in &tri.vertices {
        simplices.push(Simplex {
            vertices: vec![v],
            dim: 0,
            alpha: 0.0,
        });
    }
    let p = |i: usize| cloud.point(i);
    let tri_alpha: Vec<f64> = tri
        .triangles
        .iter()
        .map(|t| circumradius(p(t[0]), p(t[1]), p(t[2])))
        .collect();
    for e in &tri.edges {
        let [a, b] = e.v;
        let mut gabriel = true;
        let mut min_tri = f64::INFINITY;
        for &t in &e.triangles {
            let Some(&c) = tri.triangles.get(t).and_then(|t| t.iter().find(|v| !e.v.contains(v)))
            else {
                return Err(Error::Internal(format!("edge {a}-{b} refers to a bad triangle")));
            };
            if !tri.triangles[t].contains(&a) || !tri.triangles[t].contains(&b) {
                return Err(Error::Internal(format!("triangle {t} does not contain edge {a}-{b}")));
            }
            gabriel &= !encroaches(p(a), p(b), p(c));
            min_tri = min_tri.min(tri_alpha[t]);
        }
        let alpha = if gabriel { 0.5 * dist(p(a), p(b)) } else { min_tri };
        simplices.push(Simplex {
            vertices: vec![a, b],
            dim: 1,
            alpha,
        });
    }
    for (t, &alpha) in tri.triangles.iter().zip(&tri_alpha) {
        simplices.push(Simplex {
            vertices: t.to_vec(),
            dim: 2,
            alpha,
        });
    }
    Ok(FilteredComplex { simplices })
}

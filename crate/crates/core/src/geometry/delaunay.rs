//! Incremental planar Delaunay triangulation with Lawson flips.
//!
//! Points are inserted in Hilbert-curve order. Points outside the current
//! hull are joined to every visible hull edge; ties in the in-circle test
//! are broken by symbolic perturbation so the result is unique.

use super::predicates::{incircle_sos, orient2d};
use super::PointCloud;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints as cloud indices, smaller first.
    pub v: [usize; 2],
    /// One incident triangle for hull edges, two for interior edges.
    pub triangles: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Triangulation2D {
    /// Cloud indices of the vertices (first occurrence of each distinct point).
    pub vertices: Vec<usize>,
    /// Counter-clockwise triangles as cloud indices.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Number of input points dropped as exact duplicates.
    pub merged_duplicates: usize,
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [usize; 3],
    /// `n[i]` is the neighbor across the edge opposite `v[i]`.
    n: [usize; 3],
}

enum Location {
    Inside(usize),
    OnEdge(usize, usize),
    Outside(usize, usize),
}

struct Builder<'a> {
    pts: &'a [[f64; 2]],
    tris: Vec<Tri>,
    last: usize,
    stack: Vec<usize>,
}

/// Delaunay triangulation of a planar cloud.
///
/// Fails with [`Error::Degenerate`] when fewer than three distinct points
/// remain or all of them are collinear.
pub fn delaunay2d(cloud: &PointCloud) -> Result<Triangulation2D> {
    if cloud.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: cloud.dim(),
        });
    }
    let (distinct, merged) = distinct_indices(cloud);
    let pts: Vec<[f64; 2]> = distinct
        .iter()
        .map(|&i| {
            let p = cloud.point(i);
            [p[0], p[1]]
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{} distinct points cannot be triangulated",
            pts.len()
        )));
    }
    let order = hilbert_order(&pts);
    let mut b = Builder {
        pts: &pts,
        tris: Vec::with_capacity(2 * pts.len()),
        last: 0,
        stack: Vec::new(),
    };
    let (p0, p1) = (order[0], order[1]);
    let Some(k) = order[2..]
        .iter()
        .position(|&q| orient2d(pts[p0], pts[p1], pts[q]) != 0.0)
        .map(|k| k + 2)
    else {
        return Err(Error::Degenerate("all points are collinear".into()));
    };
    let pk = order[k];
    let v = if orient2d(pts[p0], pts[p1], pts[pk]) > 0.0 {
        [p0, p1, pk]
    } else {
        [p0, pk, p1]
    };
    b.tris.push(Tri { v, n: [NONE; 3] });
    for (pos, &q) in order.iter().enumerate().skip(2) {
        if pos != k {
            b.insert(q)?;
        }
    }

    let triangles: Vec<[usize; 3]> = b
        .tris
        .iter()
        .map(|t| t.v.map(|i| distinct[i]))
        .collect();
    let mut edges = Vec::with_capacity(3 * triangles.len() / 2 + pts.len());
    for (ti, t) in b.tris.iter().enumerate() {
        for i in 0..3 {
            let nb = t.n[i];
            if nb != NONE && nb < ti {
                continue;
            }
            let (x, y) = (distinct[t.v[(i + 1) % 3]], distinct[t.v[(i + 2) % 3]]);
            let mut tris_of_edge = vec![ti];
            if nb != NONE {
                tris_of_edge.push(nb);
            }
            edges.push(Edge {
                v: [x.min(y), x.max(y)],
                triangles: tris_of_edge,
            });
        }
    }
    Ok(Triangulation2D {
        vertices: distinct,
        triangles,
        edges,
        merged_duplicates: merged,
    })
}

fn distinct_indices(cloud: &PointCloud) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (cloud.point(a), cloud.point(b));
        p[0].total_cmp(&q[0])
            .then(p[1].total_cmp(&q[1]))
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; cloud.len()];
    for w in order.windows(2) {
        if cloud.point(w[0]) == cloud.point(w[1]) {
            keep[w[1]] = false;
        }
    }
    let distinct: Vec<usize> = (0..cloud.len()).filter(|&i| keep[i]).collect();
    let merged = cloud.len() - distinct.len();
    (distinct, merged)
}

fn hilbert_order(pts: &[[f64; 2]]) -> Vec<usize> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    const N: u32 = 1 << 16;
    let keys: Vec<u64> = pts
        .iter()
        .map(|p| {
            let q = |k: usize| (((p[k] - lo[k]) / side * (N - 1) as f64) as u32).min(N - 1);
            hilbert_index(N, q(0), q(1))
        })
        .collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    order
}

fn hilbert_index(n: u32, mut x: u32, mut y: u32) -> u64 {
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

impl Builder<'_> {
    fn p(&self, i: usize) -> [f64; 2] {
        self.pts[i]
    }

    fn orient_edge(&self, t: usize, e: usize, q: usize) -> f64 {
        let v = self.tris[t].v;
        orient2d(self.p(v[(e + 1) % 3]), self.p(v[(e + 2) % 3]), self.p(q))
    }

    fn classify(&self, t: usize, q: usize) -> Option<Location> {
        let mut zero = None;
        for e in 0..3 {
            let o = self.orient_edge(t, e, q);
            if o < 0.0 {
                return None;
            }
            if o == 0.0 {
                zero = Some(e);
            }
        }
        Some(match zero {
            Some(e) => Location::OnEdge(t, e),
            None => Location::Inside(t),
        })
    }

    fn locate(&self, q: usize) -> Location {
        let mut t = self.last;
        let guard = 4 * self.tris.len() + 16;
        'walk: for step in 0..guard {
            for k in 0..3 {
                // rotate the starting edge so ties cannot cycle
                let e = (k + step) % 3;
                if self.orient_edge(t, e, q) < 0.0 {
                    let nb = self.tris[t].n[e];
                    if nb == NONE {
                        return Location::Outside(t, e);
                    }
                    t = nb;
                    continue 'walk;
                }
            }
            if let Some(loc) = self.classify(t, q) {
                return loc;
            }
        }
        self.locate_brute(q)
    }

    fn locate_brute(&self, q: usize) -> Location {
        for t in 0..self.tris.len() {
            if let Some(loc) = self.classify(t, q) {
                return loc;
            }
        }
        for t in 0..self.tris.len() {
            for e in 0..3 {
                if self.tris[t].n[e] == NONE && self.orient_edge(t, e, q) < 0.0 {
                    return Location::Outside(t, e);
                }
            }
        }
        unreachable!("a point is either inside the hull or sees a hull edge")
    }

    fn set_neighbor(&mut self, t: usize, old: usize, new: usize) {
        if t == NONE {
            return;
        }
        let n = &mut self.tris[t].n;
        for slot in n.iter_mut() {
            if *slot == old {
                *slot = new;
                return;
            }
        }
    }

    /// Appends a triangle and returns its index.
    fn push(&mut self, v: [usize; 3], n: [usize; 3]) -> usize {
        self.tris.push(Tri { v, n });
        self.tris.len() - 1
    }

    fn insert(&mut self, q: usize) -> Result<()> {
        match self.locate(q) {
            Location::Inside(t) => self.split_inside(t, q),
            Location::OnEdge(t, e) => self.split_edge(t, e, q),
            Location::Outside(t, e) => self.attach_outside(t, e, q),
        }
        self.legalize(q)
    }

    fn split_inside(&mut self, t: usize, q: usize) {
        let Tri { v: [a, b, c], n: [na, nb, nc] } = self.tris[t];
        let t1 = self.tris.len();
        let t2 = t1 + 1;
        // t keeps edge bc, t1 takes ca, t2 takes ab
        self.tris[t] = Tri { v: [q, b, c], n: [na, t1, t2] };
        self.push([q, c, a], [nb, t2, t]);
        self.push([q, a, b], [nc, t, t1]);
        self.set_neighbor(nb, t, t1);
        self.set_neighbor(nc, t, t2);
        self.stack.extend([t, t1, t2]);
        self.last = t;
    }

    fn split_edge(&mut self, t: usize, e: usize, q: usize) {
        let Tri { v, n } = self.tris[t];
        let (a, b, c) = (v[e], v[(e + 1) % 3], v[(e + 2) % 3]);
        let (n_ab, n_ca) = (n[(e + 2) % 3], n[(e + 1) % 3]);
        let u = n[e];
        // t: [q, c, a] and t1: [q, a, b] replace [a, b, c] split on bc
        let t1 = self.tris.len();
        self.tris[t] = Tri { v: [q, c, a], n: [n_ca, t1, NONE] };
        self.push([q, a, b], [n_ab, NONE, t]);
        self.set_neighbor(n_ab, t, t1);
        self.stack.extend([t, t1]);
        if u != NONE {
            let Tri { v: uv, n: un } = self.tris[u];
            let k = (0..3).find(|&k| un[k] == t).expect("mutual neighbors");
            let d = uv[k];
            debug_assert!(uv[(k + 1) % 3] == c && uv[(k + 2) % 3] == b);
            let (n_bd, n_dc) = (un[(k + 1) % 3], un[(k + 2) % 3]);
            // u: [q, b, d] and u1: [q, d, c]
            let u1 = self.tris.len();
            self.tris[u] = Tri { v: [q, b, d], n: [n_bd, u1, t1] };
            self.push([q, d, c], [n_dc, t, u]);
            self.set_neighbor(n_dc, u, u1);
            self.tris[t].n[2] = u1;
            self.tris[t1].n[1] = u;
            self.stack.extend([u, u1]);
        }
        self.last = t;
    }

    fn attach_outside(&mut self, t: usize, e: usize, q: usize) {
        // hull edges as (triangle, edge index), in counter-clockwise hull order
        let mut chain = std::collections::VecDeque::from([(t, e)]);
        // forward from the edge's end vertex
        loop {
            let &(t0, e0) = chain.back().unwrap();
            let (t1, e1) = self.next_hull_edge(t0, e0);
            if (t1, e1) == (t, e) || self.orient_edge(t1, e1, q) >= 0.0 {
                break;
            }
            chain.push_back((t1, e1));
        }
        loop {
            let &(t0, e0) = chain.front().unwrap();
            let (t1, e1) = self.prev_hull_edge(t0, e0);
            if chain.contains(&(t1, e1)) || self.orient_edge(t1, e1, q) >= 0.0 {
                break;
            }
            chain.push_front((t1, e1));
        }
        let base = self.tris.len();
        let m = chain.len();
        for (k, &(ht, he)) in chain.iter().enumerate() {
            let hv = self.tris[ht].v;
            let (w0, w1) = (hv[(he + 1) % 3], hv[(he + 2) % 3]);
            let prev = if k == 0 { NONE } else { base + k - 1 };
            let next = if k + 1 == m { NONE } else { base + k + 1 };
            let nt = self.push([q, w1, w0], [ht, prev, next]);
            self.tris[ht].n[he] = nt;
            self.stack.push(nt);
        }
        self.last = base;
    }

    /// Hull edge following `(t, e)` counter-clockwise.
    fn next_hull_edge(&self, mut t: usize, e: usize) -> (usize, usize) {
        let b = self.tris[t].v[(e + 2) % 3];
        loop {
            let j = self.vertex_slot(t, b);
            let nb = self.tris[t].n[(j + 2) % 3];
            if nb == NONE {
                return (t, (j + 2) % 3);
            }
            t = nb;
        }
    }

    /// Hull edge preceding `(t, e)` counter-clockwise.
    fn prev_hull_edge(&self, mut t: usize, e: usize) -> (usize, usize) {
        let a = self.tris[t].v[(e + 1) % 3];
        loop {
            let j = self.vertex_slot(t, a);
            let nb = self.tris[t].n[(j + 1) % 3];
            if nb == NONE {
                return (t, (j + 1) % 3);
            }
            t = nb;
        }
    }

    fn vertex_slot(&self, t: usize, v: usize) -> usize {
        (0..3).find(|&j| self.tris[t].v[j] == v).expect("vertex of triangle")
    }

    /// Lawson flips for triangles whose slot 0 holds the new point `q`.
    fn legalize(&mut self, q: usize) -> Result<()> {
        let mut flips = 0usize;
        let limit = 64 * self.tris.len() + 1024;
        while let Some(t) = self.stack.pop() {
            let Tri { v: [p, b, c], n: [u, n1, n2] } = self.tris[t];
            debug_assert_eq!(p, q);
            if u == NONE {
                continue;
            }
            let Tri { v: uv, n: un } = self.tris[u];
            let k = (0..3).find(|&k| un[k] == t).expect("mutual neighbors");
            let d = uv[k];
            let inside = incircle_sos([
                (self.p(p), p),
                (self.p(b), b),
                (self.p(c), c),
                (self.p(d), d),
            ]);
            if !inside {
                continue;
            }
            flips += 1;
            if flips > limit {
                return Err(Error::Internal("Delaunay flip loop did not terminate".into()));
            }
            let (u_c, u_b) = (un[(k + 1) % 3], un[(k + 2) % 3]);
            self.tris[t] = Tri { v: [p, b, d], n: [u_c, u, n2] };
            self.tris[u] = Tri { v: [p, d, c], n: [u_b, n1, t] };
            self.set_neighbor(u_c, u, t);
            self.set_neighbor(n1, t, u);
            self.stack.push(t);
            self.stack.push(u);
        }
        Ok(())
    }
}

impl Triangulation2D {
    /// Every triangle's circumcircle is empty of other vertices (exact
    /// predicate, ties count as empty). Quadratic; meant for tests.
    pub fn is_delaunay(&self, cloud: &PointCloud) -> bool {
        let p = |i: usize| [cloud.point(i)[0], cloud.point(i)[1]];
        self.triangles.iter().all(|t| {
            self.vertices.iter().all(|&v| {
                t.contains(&v) || super::predicates::incircle(p(t[0]), p(t[1]), p(t[2]), p(v)) <= 0.0
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::predicates::incircle;
    use rand::Rng;

    fn cloud(points: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_points(2, points).unwrap()
    }

    fn check_structure(tri: &Triangulation2D, c: &PointCloud) {
        let v = tri.vertices.len() as i64;
        let e = tri.edges.len() as i64;
        let t = tri.triangles.len() as i64;
        assert_eq!(v - e + t, 1, "Euler relation");
        let incidences: usize = tri.edges.iter().map(|e| e.triangles.len()).sum();
        assert_eq!(incidences, 3 * tri.triangles.len());
        for t in &tri.triangles {
            let p = |i: usize| [c.point(i)[0], c.point(i)[1]];
            assert!(orient2d(p(t[0]), p(t[1]), p(t[2])) > 0.0);
        }
        assert!(tri.is_delaunay(c));
    }

    #[test]
    fn single_triangle() {
        let c = cloud(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let t = delaunay2d(&c).unwrap();
        assert_eq!((t.vertices.len(), t.edges.len(), t.triangles.len()), (3, 3, 1));
        check_structure(&t, &c);
    }

    #[test]
    fn convex_quadrilateral() {
        let c = cloud(&[[0.0, 0.0], [3.0, 0.2], [3.5, 2.0], [0.4, 1.7]]);
        let t = delaunay2d(&c).unwrap();
        assert_eq!((t.triangles.len(), t.edges.len()), (2, 5));
        check_structure(&t, &c);
    }

    #[test]
    fn collinear_is_degenerate() {
        let c = cloud(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [-4.0, -4.0]]);
        assert!(matches!(delaunay2d(&c), Err(Error::Degenerate(_))));
        let c = cloud(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(delaunay2d(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicates_are_merged_and_counted() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]);
        let t = delaunay2d(&c).unwrap();
        assert_eq!(t.merged_duplicates, 2);
        assert_eq!(t.vertices, vec![0, 1, 2]);
        check_structure(&t, &c);
    }

    #[test]
    fn integer_grid_with_many_cocircular_ties() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..6 {
                pts.push([i as f64, j as f64]);
            }
        }
        let c = cloud(&pts);
        let t = delaunay2d(&c).unwrap();
        assert_eq!(t.triangles.len(), 2 * 6 * 5);
        check_structure(&t, &c);
        // reversed insertion order
        let mut rev = pts.clone();
        rev.reverse();
        let t2 = delaunay2d(&cloud(&rev)).unwrap();
        assert_eq!(t2.triangles.len(), t.triangles.len());
    }

    #[test]
    fn collinear_prefix_then_off_line_points() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [1.5, 1.0], [1.5, -2.0]]);
        let t = delaunay2d(&c).unwrap();
        check_structure(&t, &c);
    }

    /// Counts triples whose circumcircle is strictly empty.
    fn brute_force_triangle_count(c: &PointCloud) -> usize {
        let p = |i: usize| [c.point(i)[0], c.point(i)[1]];
        let n = c.len();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, cc) = if orient2d(p(i), p(j), p(k)) > 0.0 {
                        (p(i), p(j), p(k))
                    } else {
                        (p(i), p(k), p(j))
                    };
                    if orient2d(a, b, cc) == 0.0 {
                        continue;
                    }
                    if (0..n).filter(|&l| l != i && l != j && l != k).all(|l| incircle(a, b, cc, p(l)) < 0.0) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn random_clouds_match_empty_circle_oracle() {
        let mut rng = crate::rng::stream(20240611, 0);
        for n in [3usize, 5, 10, 40, 100] {
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
            let c = cloud(&pts);
            let t = delaunay2d(&c).unwrap();
            check_structure(&t, &c);
            assert_eq!(t.triangles.len(), brute_force_triangle_count(&c), "n = {n}");
        }
    }

    #[test]
    fn large_random_cloud_is_delaunay() {
        let mut rng = crate::rng::stream(5, 1);
        let pts: Vec<[f64; 2]> = (0..3000).map(|_| [rng.random(), rng.random()]).collect();
        let c = cloud(&pts);
        let t = delaunay2d(&c).unwrap();
        let v = t.vertices.len() as i64;
        assert_eq!(v - t.edges.len() as i64 + t.triangles.len() as i64, 1);
        // local Delaunay check across every interior edge
        let p = |i: usize| [c.point(i)[0], c.point(i)[1]];
        for e in t.edges.iter().filter(|e| e.triangles.len() == 2) {
            let t0 = t.triangles[e.triangles[0]];
            let t1 = t.triangles[e.triangles[1]];
            let opposite = *t1.iter().find(|v| !e.v.contains(v)).unwrap();
            assert!(incircle(p(t0[0]), p(t0[1]), p(t0[2]), p(opposite)) <= 0.0);
        }
    }
}

//! Point clouds, minimal enclosing balls, planar Delaunay triangulations and
//! alpha filtrations of equal-radius disks.

mod alpha;
mod delaunay;
mod miniball;
pub mod predicates;

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::format::format_float;

pub use alpha::{alpha_filtration_2d, FilteredComplex, Simplex};
pub use delaunay::{delaunay2d, Edge, Triangulation2D};
pub use miniball::{miniball, miniball_of, Ball};

/// A finite set of points in dimension 1, 2 or 3, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    /// Subcloud made of the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
        }
    }

    /// Removes exact duplicates, keeping first occurrences in their original
    /// order. Returns the reduced cloud and the number of points merged.
    pub fn dedup(&self) -> (PointCloud, usize) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            cmp_points(self.point(a), self.point(b)).then(a.cmp(&b))
        });
        let mut keep = vec![true; self.len()];
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                keep[w[1]] = false;
            }
        }
        let kept: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        let merged = self.len() - kept.len();
        (self.select(&kept), merged)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dim={}", self.dim)?;
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|&c| format_float(c)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads one point per row. The dimension comes from a `# dim=<d>`
    /// header, else from `dim_hint`, else from the first row.
    pub fn read_csv<R: BufRead>(r: R, dim_hint: Option<usize>) -> Result<Self> {
        let mut dim = None;
        let mut coords = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("dim=") {
                    let d: usize = v.trim().parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad dimension header `{text}`"),
                    })?;
                    if let Some(h) = dim_hint {
                        if h != d {
                            return Err(Error::DimensionMismatch {
                                expected: h,
                                found: d,
                            });
                        }
                    }
                    dim = Some(d);
                }
                continue;
            }
            let row = text
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("{e} in `{text}`"),
                })?;
            let d = *dim.get_or_insert(dim_hint.unwrap_or(row.len()));
            if row.len() != d {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {d} columns, found {}", row.len()),
                });
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "non-finite coordinate".into(),
                });
            }
            coords.extend(row);
        }
        let dim = dim
            .or(dim_hint)
            .ok_or_else(|| invalid("empty point file without a dimension header"))?;
        Self::new(dim, coords)
    }

    pub fn from_csv_str(s: &str, dim_hint: Option<usize>) -> Result<Self> {
        Self::read_csv(s.as_bytes(), dim_hint)
    }
}

fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => {}
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(PointCloud::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointCloud::new(4, vec![]).is_err());
        assert!(PointCloud::new(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud =
            PointCloud::new(2, vec![0.1, 1.0 / 3.0, -2.0, 1e-300, 12345.678, 0.0]).unwrap();
        let text = cloud.to_csv_string();
        assert!(text.starts_with("# dim=2\n"));
        assert_eq!(PointCloud::from_csv_str(&text, None).unwrap(), cloud);
    }

    #[test]
    fn csv_reports_line_numbers() {
        let err = PointCloud::from_csv_str("# dim=2\n1,2\n3,x\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = PointCloud::from_csv_str("1,2\n3\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn headerless_dimension_inferred() {
        let c = PointCloud::from_csv_str("1\n2\n4\n", None).unwrap();
        assert_eq!((c.dim(), c.len()), (1, 3));
        assert!(PointCloud::from_csv_str("", None).is_err());
        assert!(PointCloud::from_csv_str("", Some(2)).unwrap().is_empty());
    }

    #[test]
    fn dedup_keeps_first_occurrences() {
        let c = PointCloud::from_points(2, &[[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [0.0, 0.0], [3.0, 1.0]])
            .unwrap();
        let (d, merged) = c.dedup();
        assert_eq!(merged, 2);
        assert_eq!(d.coords(), &[1.0, 2.0, 0.0, 0.0, 3.0, 1.0]);
    }
}

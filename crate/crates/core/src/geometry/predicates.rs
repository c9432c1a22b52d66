//! Orientation and in-circle tests with adaptive exact arithmetic, plus a
//! symbolically perturbed in-circle that never reports a tie.

use robust::Coord;

#[inline]
fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

/// Positive when `a, b, c` turn counter-clockwise, zero when collinear.
pub fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`; zero when cocircular.
pub fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

/// In-circle test for the counter-clockwise triangle `a, b, c` and query
/// `d`, with cocircular ties broken by perturbing each lifted coordinate
/// `x² + y²` by an infinitesimal that is larger for smaller point indices.
///
/// The determinant's derivative with respect to the lift of each point is
/// a signed orientation cofactor; the first non-zero one in ascending index
/// order decides.
pub fn incircle_sos(pts: [([f64; 2], usize); 4]) -> bool {
    let [(a, _), (b, _), (c, _), (d, _)] = pts;
    let det = incircle(a, b, c, d);
    if det != 0.0 {
        return det > 0.0;
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by_key(|&k| pts[k].1);
    for k in order {
        let cofactor = match k {
            0 => orient2d(b, c, d),
            1 => -orient2d(a, c, d),
            2 => orient2d(a, b, d),
            _ => -orient2d(a, b, c),
        };
        if cofactor != 0.0 {
            return cofactor > 0.0;
        }
    }
    false
}

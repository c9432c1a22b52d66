//! Finite-difference stencils.

/// Fornberg's algorithm: weights `w` with `f^{(order)}(z) ≈ Σ w_i f(x_i)`.
pub fn fornberg_weights(z: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Central derivative of `f` at `x` with a stencil of accuracy order 6,
/// Richardson-extrapolated over steps `h` and `h/2`.
pub fn central_derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, order: usize, h: f64) -> f64 {
    // smallest symmetric stencil of accuracy order 6
    let half_width = order.div_ceil(2) + 2;
    let offsets: Vec<f64> = (-(half_width as i64)..=half_width as i64)
        .map(|i| i as f64)
        .collect();
    let weights = fornberg_weights(0.0, &offsets, order);
    let mut apply = |step: f64| -> f64 {
        let sum: f64 = offsets
            .iter()
            .zip(&weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(o, w)| w * f(x + o * step))
            .sum();
        sum / step.powi(order as i32)
    };
    let coarse = apply(h);
    let fine = apply(h / 2.0);
    (64.0 * fine - coarse) / 63.0
}

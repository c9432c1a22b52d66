/// Shortest round-trip decimal text for `x`, switching to exponent notation
/// for very large or very small magnitudes.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || x.is_nan() || x.is_infinite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

//! Grid strings `start:stop:step` and `geom:start:stop:count`.

use crate::error::{invalid, Result};

/// Linear grid from `start` up to `stop` inclusive (within rounding).
pub fn linear(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(invalid(format!("bad linear grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(invalid("grid has more than 10^7 nodes"));
    }
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// `count` geometrically spaced nodes from `start` to `stop` inclusive.
pub fn geometric(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > start && stop.is_finite()) || count < 2 {
        return Err(invalid(format!("bad geometric grid geom:{start}:{stop}:{count}")));
    }
    let ratio = (stop / start).ln() / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|k| start * (k as f64 * ratio).exp()).collect();
    g[count - 1] = stop;
    Ok(g)
}

pub fn parse(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad number `{s}` in grid `{spec}`")))
    };
    match parts.as_slice() {
        ["geom", a, b, n] => {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad count `{n}` in grid `{spec}`")))?;
            geometric(num(a)?, num(b)?, n)
        }
        [a, b, s] => linear(num(a)?, num(b)?, num(s)?),
        _ => Err(invalid(format!(
            "grid `{spec}` is neither start:stop:step nor geom:start:stop:count"
        ))),
    }
}

/// `Λ = 0` followed by 200 geometric nodes over `[0.01, 50]`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(geometric(1e-2, 50.0, 200).expect("valid constants"));
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_includes_stop() {
        assert_eq!(parse("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse("0:5:1").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(parse("0:0.95:0.1").unwrap().len(), 10);
    }

    #[test]
    fn geometric_endpoints() {
        let g = parse("geom:0.01:50:200").unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[199], 50.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1:2", "0:1:0", "1:0:0.1", "geom:0:1:5", "geom:1:2:1", "a:b:c"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[200], 50.0);
    }
}

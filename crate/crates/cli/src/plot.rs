//! Static SVG line plots of curve CSVs.

use std::fmt::Write;

use ecclab_core::{format_float, Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
/// Per axis, so at most 12 labels in total.
const MAX_TICKS: usize = 6;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug)]
pub struct Series {
    pub label: String,
    pub x_name: String,
    pub y_name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl Series {
    /// The first column is the abscissa; the ordinate is the `value`,
    /// `mean`, `rho` or `chi` column, else the second one.
    pub fn parse(label: &str, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.len() < 2 {
            return Err(Error::Parse {
                line: hline,
                msg: "need at least two columns".into(),
            });
        }
        let yc = names
            .iter()
            .position(|n| ["value", "mean", "rho", "chi"].contains(n))
            .unwrap_or(1);
        let sc = names.iter().position(|n| *n == "stderr");
        let mut s = Series {
            label: label.to_string(),
            x_name: names[0].to_string(),
            y_name: names[yc].to_string(),
            x: Vec::new(),
            y: Vec::new(),
            stderr: sc.map(|_| Vec::new()),
        };
        for (line, text) in lines {
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                match fields[k].parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse {
                        line,
                        msg: format!("bad number `{}`", fields[k]),
                    }),
                }
            };
            s.x.push(num(0)?);
            s.y.push(num(yc)?);
            if let (Some(k), Some(se)) = (sc, s.stderr.as_mut()) {
                se.push(num(k)?);
            }
        }
        if s.x.is_empty() {
            return Err(Error::Parse {
                line: hline,
                msg: "no data rows".into(),
            });
        }
        Ok(s)
    }

    fn band(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let se = self.stderr.as_ref()?;
        if se.iter().all(|&s| s == 0.0) {
            return None;
        }
        let lo = self.y.iter().zip(se).map(|(y, s)| y - 2.0 * s).collect();
        let hi = self.y.iter().zip(se).map(|(y, s)| y + 2.0 * s).collect();
        Some((lo, hi))
    }
}

/// Round tick positions covering `[lo, hi]`, at most `MAX_TICKS` of them.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / (MAX_TICKS - 1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| (hi / s).floor() - (lo / s).ceil() + 1.0 <= MAX_TICKS as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    format_float(if r == 0.0 { 0.0 } else { r })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let ys = series.iter().flat_map(|s| {
        let band = s.band();
        let extra: Vec<f64> = band.map(|(lo, hi)| lo.into_iter().chain(hi).collect()).unwrap_or_default();
        s.y.iter().copied().chain(extra)
    });
    let (ylo, yhi) = range(ys);
    let pad = 0.05 * (yhi - ylo);
    let (y0, y1) = (ylo - pad, yhi + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000" stroke-width="1"/>"##
    );
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(
            w,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let y = py(0.0);
        let _ = writeln!(
            w,
            r##"<line id="zero" x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
            LEFT + pw
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&series[0].x_name)
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&series[0].y_name)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if let Some((lo, hi)) = s.band() {
            let mut pts: Vec<String> = s.x.iter().zip(&hi).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            pts.extend(s.x.iter().zip(&lo).rev().map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))));
            let _ = writeln!(
                w,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s.x.iter().zip(&s.y).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = LEFT + pw - 180.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_counts() {
        for (lo, hi) in [(0.0, 1.0), (-0.3, 1.1), (0.0, 50.0), (1e-3, 2e-3), (-7.0, 123.0)] {
            let t = ticks(lo, hi);
            assert!(!t.is_empty() && t.len() <= MAX_TICKS, "{lo} {hi} {t:?}");
            assert!(t.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn parse_picks_columns() {
        let s = Series::parse("c.csv", "lambda,value,stderr,provenance\n0,1,0,monte-carlo\n1,0.5,0.1,monte-carlo\n").unwrap();
        assert_eq!((s.x, s.y, s.stderr), (vec![0.0, 1.0], vec![1.0, 0.5], Some(vec![0.0, 0.1])));
        let e = Series::parse("c.csv", "lambda,value\n0,1\n1,x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn svg_has_band_and_legend() {
        let s = Series::parse("mc.csv", "lambda,mean,stderr\n0,1,0\n1,0.5,0.1\n2,0.2,0.1\n").unwrap();
        let svg = render(&[s]).unwrap();
        assert!(svg.contains("<polygon") && svg.contains("<polyline") && svg.contains(">mc.csv</text>"));
        assert!(svg.contains(r#"width="800" height="600""#));
    }
}

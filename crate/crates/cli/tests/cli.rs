use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ecclab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecclab"))
        .args(args)
        .current_dir(cwd)
        .env("ECCLAB_THREADS", "2")
        .output()
        .expect("spawn ecclab")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = ecclab(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = ecclab(args, cwd);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Data rows of a CSV, skipping the header and `#` comments.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// Rows of a headerless point CSV.
fn points(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sample_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--dist", "uniform-box(s=1)", "--d", "2", "--n", "100", "--seed", "7"];
    let a = ok(&args, dir.path());
    let r = points(&a);
    assert_eq!(r.len(), 100);
    assert!(r.iter().all(|row| row.len() == 2));
    for row in &r {
        for c in row {
            let v: f64 = c.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert_eq!(a, ok(&args, dir.path()));
}

#[test]
fn poisson_sample_records_realized_count() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["sample", "--dist", "normal2d", "--n", "100", "--mode", "poisson", "--seed", "3", "--out", "p.csv"],
        dir.path(),
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("p.csv.manifest.json")).unwrap()).unwrap();
    let n = points(&fs::read_to_string(dir.path().join("p.csv")).unwrap()).len();
    assert_eq!(manifest["realized_n"].as_u64().unwrap() as usize, n);
    assert_eq!(manifest["mode"], "poisson");
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn bad_model_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (c, err) = code(&["sample", "--dist", "gaussian", "--n", "5"], dir.path());
    assert_eq!(c, 2);
    assert!(err.contains("gaussian"), "{err}");
    let (c, _) = code(&["sample", "--dist", "normal2d", "--n", "5", "--bogus"], dir.path());
    assert_eq!(c, 2);
}

#[test]
fn ecc_radius_grid_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "0\n1\n3\n").unwrap();
    let out = ok(&["ecc", "--points", "p.csv", "--r-grid", "0:1.5:0.25"], dir.path());
    // closed balls: gap g merges at r = g/2
    let expect = [(0.0, 3), (0.25, 3), (0.5, 2), (0.75, 2), (1.0, 1), (1.25, 1), (1.5, 1)];
    let got: Vec<(f64, i64)> = rows(&out).iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(got, expect);
    assert!(out.starts_with("r,chi\n"));
}

#[test]
fn ecc_lambda_grid_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sample", "--dist", "normal2d", "--n", "50", "--out", "p.csv"], dir.path());
    let out = ok(&["ecc", "--points", "p.csv", "--lambda-grid", "0:4:1"], dir.path());
    assert!(out.starts_with("lambda,value\n0,1\n"), "{out}");
    assert_eq!(rows(&out).len(), 5);
}

#[test]
fn ecc_error_exits() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(code(&["ecc", "--points", "empty.csv"], dir.path()).0, 2);
    fs::write(dir.path().join("p3.csv"), "0,0,0\n1,0,0\n").unwrap();
    assert_eq!(code(&["ecc", "--points", "p3.csv"], dir.path()).0, 3);
    assert_eq!(code(&["ecc", "--points", "p3.csv", "--d", "3"], dir.path()).0, 3);
    fs::write(dir.path().join("bad.csv"), "0,0\n1,x\n").unwrap();
    let (c, err) = code(&["ecc", "--points", "bad.csv"], dir.path());
    assert_eq!(c, 2);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn eecc_methods() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "0:6.283185307179586:6.283185307179586";
    let closed = ok(&["eecc", "--dist", "normal2d", "--lambda-grid", grid], dir.path());
    assert!(closed.starts_with("lambda,value,provenance\n"));
    let r = rows(&closed);
    let v: f64 = r[1][1].parse().unwrap();
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(r[1][2], "closed-form");

    let quad = ok(&["eecc", "--dist", "normal2d", "--method", "quadrature", "--lambda-grid", grid], dir.path());
    let q: f64 = rows(&quad)[1][1].parse().unwrap();
    assert!((q - v).abs() < 1e-6);
    assert_eq!(rows(&quad)[1][2], "quadrature");

    let mc_args = ["eecc", "--dist", "exp1d", "--method", "montecarlo", "--m", "2000", "--seed", "5", "--lambda-grid", "0:2:1"];
    let mc = ok(&mc_args, dir.path());
    assert!(mc.starts_with("lambda,value,stderr,provenance\n"));
    assert_eq!(mc, ok(&mc_args, dir.path()));
}

#[test]
fn invert_uniform_curve_in_plane() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        &["invert", "--curve-dist", "uniform-box", "--d", "2", "--grid", "0:1:0.25", "--reconstruct-radial", "rho.csv"],
        dir.path(),
    );
    let r = rows(&out);
    let at_half: f64 = r.iter().find(|row| row[0] == "0.5").unwrap()[1].parse().unwrap();
    assert!((at_half - 0.5).abs() < 1e-6);
    let profile = fs::read_to_string(dir.path().join("rho.csv")).unwrap();
    assert!(profile.starts_with("u,rho\n"));
    for row in rows(&profile) {
        let (u, rho): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let exact = (-std::f64::consts::PI * u * u).exp();
        assert!((rho - exact).abs() < 1e-3, "u={u} rho={rho} exact={exact}");
    }
}

#[test]
fn invert_normal2d_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ymax = 1.0 / std::f64::consts::TAU;
    let out = ok(&["invert", "--curve-dist", "normal2d", "--d", "2"], dir.path());
    for row in rows(&out) {
        let (y, v): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        if y >= 0.05 * ymax && y <= 0.95 * ymax {
            // f(X) is uniform on [0, ymax]
            assert!((v - (1.0 - y / ymax)).abs() < 1e-5, "y={y}");
        }
    }
}

#[test]
fn invert_formula_file() {
    let dir = tempfile::tempdir().unwrap();
    // (1 − e^{−Λ})/Λ is the d = 1 curve of e^{−x}, whose excess mass is 1 − y
    fs::write(
        dir.path().join("f.json"),
        r#"{"terms": [{"c": 1, "k": -1}, {"c": -1, "k": -1, "a": 1}]}"#,
    )
    .unwrap();
    let out = ok(&["invert", "--curve-file", "f.json", "--d", "1", "--grid", "0:0.9:0.3"], dir.path());
    for row in rows(&out) {
        let (y, v): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((v - (1.0 - y)).abs() < 1e-9, "y={y} v={v}");
    }
    // e^{−Λ} in d = 1 comes from the unit interval: f̂ = 1 below the atom at 1
    fs::write(dir.path().join("u.json"), r#"{"terms": [{"c": 1, "k": 0, "a": 1}]}"#).unwrap();
    let out = ok(&["invert", "--curve-file", "u.json", "--d", "1", "--grid", "0:0.9:0.3"], dir.path());
    assert!(rows(&out).iter().all(|r| (r[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-9), "{out}");
}

#[test]
fn invert_error_exits() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["invert", "--curve-dist", "normal2d", "--d", "3"], dir.path()).0, 3);
    fs::write(
        dir.path().join("noisy.csv"),
        "lambda,value\n0,1\n1,0.37\n2,0.14\n3,0.06\n4,0.02\n5,0.009\n6,0.001\n",
    )
    .unwrap();
    let (c, err) = code(&["invert", "--curve-file", "noisy.csv", "--d", "1"], dir.path());
    assert_eq!(c, 4);
    assert!(err.contains("pre-check"), "{err}");
    fs::write(dir.path().join("smooth.csv"), {
        let mut s = String::from("lambda,value\n");
        for i in 0..=400 {
            let l = i as f64 / 100.0;
            s.push_str(&format!("{l},{}\n", (-l).exp()));
        }
        s
    })
    .unwrap();
    assert_eq!(code(&["invert", "--curve-file", "smooth.csv", "--d", "1"], dir.path()).0, 3);
}

#[test]
fn experiment_smoke() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"model": {"name": "uniform-box", "params": {"s": 1}}, "dim": 2, "n": 100, "trials": 2, "seed": 11, "lambdas": "0:5:0.5"}"#,
    )
    .unwrap();
    ok(&["experiment", "--config", "cfg.json", "--out-dir", "run"], dir.path());
    let run = dir.path().join("run");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["config_hash"].as_str().is_some_and(|h| h.len() == 64));
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["elapsed_seconds"].as_f64().is_some());
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert!(config["tool_version"].is_string());
    assert_eq!(config["trials"], 2);
    let curve = fs::read_to_string(run.join("curve.csv")).unwrap();
    assert!(curve.starts_with("lambda,mean,stderr,predicted,z\n0,1,0,1,0\n"));
    assert_eq!(rows(&curve).len(), 11);
    assert!(rows(&curve).iter().all(|r| r.len() == 5));

    ok(&["experiment", "--config", "cfg.json", "--out-dir", "again"], dir.path());
    assert_eq!(curve, fs::read_to_string(dir.path().join("again/curve.csv")).unwrap());
}

#[test]
fn compare_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["eecc", "--dist", "uniform-box", "--d", "1", "--lambda-grid", "0:5:0.01", "--out", "u1.csv"], dir.path());
    ok(&["eecc", "--dist", "uniform-box", "--d", "2", "--lambda-grid", "0:5:0.01", "--out", "u2.csv"], dir.path());
    let same: serde_json::Value = serde_json::from_str(&ok(&["compare", "--a", "u1.csv", "--b", "u1.csv"], dir.path())).unwrap();
    assert_eq!(same["sup_distance"].as_f64(), Some(0.0));
    let diff: serde_json::Value = serde_json::from_str(&ok(&["compare", "--a", "u1.csv", "--b", "u2.csv"], dir.path())).unwrap();
    assert!((diff["sup_distance"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-12);

    ok(&["invert", "--curve-dist", "exp1d", "--d", "1", "--grid", "0:1:0.01", "--out", "e.csv"], dir.path());
    let ks: serde_json::Value = serde_json::from_str(&ok(&["compare", "--a", "e.csv", "--b", "e.csv"], dir.path())).unwrap();
    assert_eq!(ks["ks_distance"].as_f64(), Some(0.0));

    fs::write(dir.path().join("bad.csv"), "lambda,value\n0,1\n1\n").unwrap();
    let (c, err) = code(&["compare", "--a", "u1.csv", "--b", "bad.csv"], dir.path());
    assert_eq!(c, 2);
    assert!(err.contains("line 3"), "{err}");
}

fn polyline(svg: &str, index: usize) -> Vec<(f64, f64)> {
    let start = svg.match_indices("<polyline points=\"").nth(index).unwrap().0 + 18;
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end]
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn attr(tag: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let i = tag.find(&key).unwrap() + key.len();
    tag[i..i + tag[i..].find('"').unwrap()].parse().unwrap()
}

#[test]
fn plot_uniform_plane_curve_crosses_zero_at_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["eecc", "--dist", "uniform-box", "--d", "2", "--lambda-grid", "0:4:0.05", "--out", "u2.csv"], dir.path());
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"model": "uniform-box(s=1)", "dim": 2, "n": 200, "trials": 4, "seed": 2, "lambdas": "0:4:0.25"}"#,
    )
    .unwrap();
    ok(&["experiment", "--config", "cfg.json", "--out-dir", "run"], dir.path());
    ok(&["plot", "--in", "u2.csv,run/curve.csv", "--out", "fig.svg"], dir.path());
    let svg = fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"width="800" height="600""#));
    assert!(svg.contains(">u2.csv</text>") && svg.contains(">curve.csv</text>"));
    assert!(svg.contains("<polygon"), "experiment curve carries an error band");
    let labels = svg.matches("text-anchor=\"middle\">").count() + svg.matches("text-anchor=\"end\">").count();
    assert!(labels <= 12 + 2, "{labels} labels");

    let zero_tag = &svg[svg.find("<line id=\"zero\"").unwrap()..];
    let y0 = attr(zero_tag, "y1");
    let pts = polyline(&svg, 0);
    let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
    let crossings: Vec<f64> = pts
        .windows(2)
        .filter(|w| w[0].1 != y0 && (w[0].1 - y0) * (w[1].1 - y0) <= 0.0)
        .map(|w| {
            let x = w[0].0 + (y0 - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0);
            4.0 * (x - first) / (last - first)
        })
        .collect();
    assert_eq!(crossings.len(), 1, "{crossings:?}");
    assert!((crossings[0] - 1.0).abs() < 0.02, "{crossings:?}");
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "lambda,value\n0,1\n0.5,oops\n").unwrap();
    let (c, err) = code(&["plot", "--in", "bad.csv", "--out", "x.svg"], dir.path());
    assert_eq!(c, 2);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn help_lists_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(&["--help"], dir.path());
    for name in ["uniform-box", "exp1d", "normal1d", "normal2d", "explaplace2d", "student2d", "cubicexp3d", "ECCLAB_THREADS"] {
        assert!(help.contains(name), "{name}");
    }
    assert!(help.contains("n=1..100"));
}

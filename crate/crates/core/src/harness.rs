//! Monte-Carlo experiments comparing empirical curves `n⁻¹χ` with their
//! predicted limits, and simple distances between curves.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::densities::{DensityModel, ModelSpec};
use crate::ecc::{ecc_curve_1d, ecc_curve_2d, ecc_in_lambda, LambdaCurve};
use crate::error::{invalid, Error, Result};
use crate::format::format_float;
use crate::geometry::PointCloud;
use crate::grid;
use crate::laplace::GridFunction;
use crate::limits::{closed_form_eecc, eecc_quadrature, Provenance};
use crate::rng::stream;

pub const THREADS_ENV: &str = "ECCLAB_THREADS";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Exactly `n` independent points.
    #[default]
    Bernoulli,
    /// Poisson process with intensity `n f`.
    Poisson,
}

/// Model given either as `name(k=v,...)` or as `{name, dim, params}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelField {
    Text(String),
    Spec(ModelSpec),
}

/// Λ grid given as explicit values or as a `start:stop:step` /
/// `geom:start:stop:count` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridField {
    Values(Vec<f64>),
    Spec(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelField,
    pub dim: usize,
    pub n: usize,
    pub trials: usize,
    #[serde(default)]
    pub mode: SamplingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<GridField>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn model(&self) -> Result<DensityModel> {
        match &self.model {
            ModelField::Text(s) => DensityModel::parse(s, Some(self.dim)),
            ModelField::Spec(spec) => {
                let mut spec = spec.clone();
                spec.dim.get_or_insert(self.dim);
                DensityModel::from_spec(&spec)
            }
        }
    }

    /// The Λ grid, with 0 prepended when missing.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let mut g = match &self.lambdas {
            None => grid::default_lambda_grid(),
            Some(GridField::Values(v)) => v.clone(),
            Some(GridField::Spec(s)) => grid::parse(s)?,
        };
        if g.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("Λ grid must be strictly increasing, finite and non-negative"));
        }
        if g.first() != Some(&0.0) {
            g.insert(0, 0.0);
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<DensityModel> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Unsupported(format!(
                "empirical curves in dimension {} (only 1 and 2)",
                self.dim
            )));
        }
        if self.n == 0 || self.trials == 0 {
            return Err(invalid("sample size and trial count must be at least 1"));
        }
        self.grid()?;
        self.model()
    }

    /// SHA-256 of the canonical JSON encoding, without the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c)?;
        Ok(format!("{:x}", Sha256::digest(bytes)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub lambdas: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub predicted: Vec<f64>,
    pub prediction: Provenance,
    pub z: Vec<f64>,
    /// Number of points drawn in each trial.
    pub realized_n: Vec<usize>,
    pub threads: usize,
    pub elapsed_seconds: f64,
    pub started_unix: u64,
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn trial(model: &DensityModel, config: &ExperimentConfig, lambdas: &[f64], index: usize) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream(config.seed, index as u64);
    let cloud: PointCloud = match config.mode {
        SamplingMode::Bernoulli => model.sample(&mut rng, config.n),
        SamplingMode::Poisson => model.poisson_sample(&mut rng, config.n as f64)?,
    };
    let n = config.n as f64;
    if cloud.is_empty() {
        let values = lambdas.iter().map(|&l| if l == 0.0 { 1.0 } else { 0.0 }).collect();
        return Ok((values, 0));
    }
    let step = match config.dim {
        1 => ecc_curve_1d(&cloud)?,
        _ => ecc_curve_2d(&cloud)?,
    };
    Ok((ecc_in_lambda(&step, n, config.dim, lambdas)?.values, cloud.len()))
}

/// Runs `trials` independent samples; trial `i` draws from substream
/// `(seed, i)`. Trials run on a pool capped by `ECCLAB_THREADS` and are
/// aggregated in trial order, so the result does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let model = config.validate()?;
    let lambdas = config.grid()?;
    let threads = thread_count()?;
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| trial(&model, config, &lambdas, i))
            .collect()
    });
    let mut curves = Vec::with_capacity(config.trials);
    let mut realized_n = Vec::with_capacity(config.trials);
    for (index, o) in outcomes.into_iter().enumerate() {
        let (values, n) = o.map_err(|e| Error::Trial {
            index,
            source: Box::new(e),
        })?;
        curves.push(values);
        realized_n.push(n);
    }
    let t = config.trials as f64;
    let mut mean = vec![0.0; lambdas.len()];
    let mut stderr = vec![0.0; lambdas.len()];
    for (j, m) in mean.iter_mut().enumerate() {
        *m = curves.iter().map(|c| c[j]).sum::<f64>() / t;
        if config.trials > 1 {
            let ss: f64 = curves.iter().map(|c| (c[j] - *m).powi(2)).sum();
            stderr[j] = (ss / (t - 1.0) / t).sqrt();
        }
    }
    let (predicted, prediction) = predict(&model, config.dim, &lambdas)?;
    let z = mean
        .iter()
        .zip(&predicted)
        .zip(&stderr)
        .map(|((m, p), s)| {
            if *s > 0.0 {
                (m - p) / s
            } else if m == p {
                0.0
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        config_hash: config.hash()?,
        lambdas,
        mean,
        stderr,
        predicted,
        prediction,
        z,
        realized_n,
        threads,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        started_unix,
    })
}

/// Closed form when one exists, quadrature of the transform otherwise.
fn predict(model: &DensityModel, d: usize, lambdas: &[f64]) -> Result<(Vec<f64>, Provenance)> {
    let closed: Result<Vec<f64>> = lambdas.iter().map(|&l| closed_form_eecc(model, l)).collect();
    match closed {
        Ok(v) => Ok((v, Provenance::ClosedForm)),
        Err(_) => {
            let v = lambdas
                .iter()
                .map(|&l| eecc_quadrature(model, d, l))
                .collect::<Result<Vec<f64>>>()?;
            Ok((v, Provenance::Quadrature))
        }
    }
}

impl ExperimentResult {
    pub fn write_curve_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,mean,stderr,predicted,z")?;
        for i in 0..self.lambdas.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                format_float(self.lambdas[i]),
                format_float(self.mean[i]),
                format_float(self.stderr[i]),
                format_float(self.predicted[i]),
                format_float(self.z[i])
            )?;
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<LambdaCurve> {
        LambdaCurve::new(self.lambdas.clone(), self.mean.clone(), Some(self.stderr.clone()))
    }

    /// Writes `config.json`, `curve.csv` and `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        #[derive(Serialize)]
        struct ConfigEcho<'a> {
            tool_version: &'a str,
            #[serde(flatten)]
            config: &'a ExperimentConfig,
        }
        let echo = ConfigEcho {
            tool_version: TOOL_VERSION,
            config: &self.config,
        };
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(&echo)? + "\n")?;

        let mut csv = Vec::new();
        self.write_curve_csv(&mut csv)?;
        fs::write(dir.join("curve.csv"), &csv)?;

        #[derive(Serialize)]
        struct Manifest<'a> {
            tool_version: &'a str,
            config_hash: &'a str,
            seed: u64,
            trials: usize,
            mode: SamplingMode,
            realized_n: &'a [usize],
            prediction: Provenance,
            threads: usize,
            started_unix: u64,
            elapsed_seconds: f64,
            curve_sha256: String,
        }
        let manifest = Manifest {
            tool_version: TOOL_VERSION,
            config_hash: &self.config_hash,
            seed: self.config.seed,
            trials: self.config.trials,
            mode: self.config.mode,
            realized_n: &self.realized_n,
            prediction: self.prediction,
            threads: self.threads,
            started_unix: self.started_unix,
            elapsed_seconds: self.elapsed_seconds,
            curve_sha256: format!("{:x}", Sha256::digest(&csv)),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveComparison {
    pub sup_distance: f64,
    pub l1_distance: f64,
    /// Λ where the absolute difference is largest.
    pub argmax: f64,
    pub points: usize,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return ys[i];
    }
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] * (1.0 - w) + ys[i] * w
}

/// Distances between two curves on the grid of `a`, resampling `b` by
/// linear interpolation where the grids differ. Only the overlap of the
/// two Λ ranges is compared.
pub fn compare_curves(a: &LambdaCurve, b: &LambdaCurve) -> Result<CurveComparison> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("cannot compare empty curves"));
    }
    let (lo, hi) = (b.lambdas[0], b.lambdas[b.len() - 1]);
    let same_grid = a.lambdas == b.lambdas;
    let pts: Vec<(f64, f64)> = a
        .lambdas
        .iter()
        .zip(&a.values)
        .enumerate()
        .filter(|(_, (l, _))| same_grid || (**l >= lo && **l <= hi))
        .map(|(i, (&l, &v))| {
            let other = if same_grid { b.values[i] } else { interpolate(&b.lambdas, &b.values, l) };
            (l, (v - other).abs())
        })
        .collect();
    if pts.is_empty() {
        return Err(invalid(format!(
            "Λ ranges [{}, {}] and [{lo}, {hi}] do not overlap",
            a.lambdas[0],
            a.lambdas[a.len() - 1]
        )));
    }
    let mut best = pts[0];
    for &p in &pts {
        if p.1 > best.1 {
            best = p;
        }
    }
    let l1 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(CurveComparison {
        sup_distance: best.1,
        l1_distance: l1,
        argmax: best.0,
        points: pts.len(),
    })
}

/// `sup |f̂ − ĝ|` over the union of both level grids (within their common
/// range), reading each function by linear interpolation.
pub fn ks_excess(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let lo = f.grid[0].max(g.grid[0]);
    let hi = f.grid[f.grid.len() - 1].min(g.grid[g.grid.len() - 1]);
    if lo > hi {
        return Err(invalid("level grids do not overlap"));
    }
    let mut pts: Vec<f64> = f.grid.iter().chain(&g.grid).copied().filter(|&y| y >= lo && y <= hi).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(pts.iter().map(|&y| (f.eval(y) - g.eval(y)).abs()).fold(0.0, f64::max))
}

/// Default location of experiment results when neither the config nor the
/// caller names one.
pub fn default_output_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    Ok(PathBuf::from(format!("experiment-{}", &config.hash()?[..12])))
}

mod plot;

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ecclab_core::densities::{DensityModel, CATALOG_HELP};
use ecclab_core::ecc::{ecc_curve_1d, ecc_curve_2d, ecc_in_lambda, LambdaCurve};
use ecclab_core::geometry::PointCloud;
use ecclab_core::harness::{compare_curves, default_output_dir, ks_excess, run_experiment, ExperimentConfig};
use ecclab_core::laplace::{
    invert_excess_1d, invert_excess_2d, reconstruct_radial, smoothness_precheck, Eecc, ExpLaurent, GridFunction,
    DEFAULT_NODES,
};
use ecclab_core::limits::{LimitCurve, Provenance};
use ecclab_core::rng::stream;
use ecclab_core::{format_float, grid, Error, Result};

fn after_help() -> String {
    let mut s = String::from("Models:\n");
    for line in CATALOG_HELP {
        s.push_str("  ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(
        "\nGrids: `start:stop:step` or `geom:start:stop:count`.\n\
         Environment: ECCLAB_THREADS caps the worker count (default: logical cores).\n\
         Exit codes: 0 success, 2 input error, 3 unsupported scope, 4 numerical pre-check failure.",
    );
    s
}

#[derive(Parser)]
#[command(name = "ecclab", version, about = "Euler characteristic curves of random Čech complexes", after_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bernoulli,
    Poisson,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Quadrature,
    Montecarlo,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a point cloud from a catalog model.
    #[command(after_help = after_help())]
    Sample {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        d: Option<usize>,
        /// Number of points, or the intensity in Poisson mode.
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "bernoulli")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; a `<out>.manifest.json` is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Euler characteristic curve of a point cloud.
    Ecc {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, conflicts_with = "r_grid")]
        lambda_grid: Option<String>,
        /// Report the raw curve χ(r) on this radius grid instead.
        #[arg(long)]
        r_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limit curve of a catalog model.
    #[command(after_help = after_help())]
    Eecc {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_enum, default_value = "closed")]
        method: Method,
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Monte-Carlo draws per grid point.
        #[arg(long, default_value_t = 100_000)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the excess mass function from an analytic limit curve.
    #[command(after_help = after_help())]
    Invert {
        /// Catalog model whose limit curve is inverted; a bare
        /// `uniform-box` means the curve e^{-Λ}.
        #[arg(long, required_unless_present = "curve_file", conflicts_with = "curve_file")]
        curve_dist: Option<String>,
        /// JSON exponential-Laurent formula, or a tabulated CSV (rejected).
        #[arg(long)]
        curve_file: Option<PathBuf>,
        #[arg(long)]
        d: usize,
        /// Level grid; defaults to 200 steps up to the density maximum.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
        /// Also reconstruct the radial profile ρ(u) into this CSV.
        #[arg(long)]
        reconstruct_radial: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Distances between two curve CSVs (Λ curves or excess mass grids).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot curve CSVs as a standalone SVG.
    Plot {
        #[arg(long = "in", value_delimiter = ',', required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Trial { source, .. } => exit_code(source),
        Error::Unsupported(_) | Error::ClosedFormUnavailable(_) => 3,
        Error::Precheck(_) | Error::Inversion { .. } | Error::DegenerateDenominator { .. } | Error::Reconstruction(_) => 4,
        Error::Internal(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        e => e,
    }
}

fn check_dim(d: usize) -> Result<()> {
    match d {
        1 | 2 => Ok(()),
        3 => Err(Error::Unsupported("dimension 3 (only d = 1 and d = 2 are handled)".into())),
        _ => Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {d}"))),
    }
}

fn lambda_grid(spec: Option<&str>) -> Result<Vec<f64>> {
    spec.map_or_else(|| Ok(grid::default_lambda_grid()), grid::parse)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sample {
            dist,
            d,
            n,
            mode,
            seed,
            out,
        } => {
            let model = DensityModel::parse(&dist, d)?;
            let mut rng = stream(seed, 0);
            let cloud = match mode {
                Mode::Bernoulli => model.sample(&mut rng, n),
                Mode::Poisson => model.poisson_sample(&mut rng, n as f64)?,
            };
            emit(out.as_deref(), |w| cloud.write_csv(w))?;
            let manifest = json!({
                "tool_version": env!("CARGO_PKG_VERSION"),
                "model": model.to_spec(),
                "mode": match mode { Mode::Bernoulli => "bernoulli", Mode::Poisson => "poisson" },
                "n": n,
                "realized_n": cloud.len(),
                "seed": seed,
            });
            match out {
                Some(p) => {
                    let mut name = p.into_os_string();
                    name.push(".manifest.json");
                    fs::write(name, serde_json::to_string_pretty(&manifest)? + "\n")?;
                }
                None => eprintln!("realized N = {}", cloud.len()),
            }
            Ok(())
        }
        Command::Ecc {
            points,
            d,
            lambda_grid: lg,
            r_grid,
            out,
        } => {
            if let Some(d) = d {
                check_dim(d)?;
            }
            let cloud = PointCloud::read_csv(open(&points)?, d).map_err(|e| with_path(&points, e))?;
            check_dim(cloud.dim())?;
            if cloud.is_empty() {
                return Err(Error::InvalidArgument(format!("{}: no points", points.display())));
            }
            let step = match cloud.dim() {
                1 => ecc_curve_1d(&cloud)?,
                _ => ecc_curve_2d(&cloud)?,
            };
            match r_grid {
                Some(spec) => {
                    let radii = grid::parse(&spec)?;
                    emit(out.as_deref(), |w| {
                        writeln!(w, "r,chi")?;
                        for r in radii {
                            writeln!(w, "{},{}", format_float(r), step.eval(r))?;
                        }
                        Ok(())
                    })
                }
                None => {
                    let curve = ecc_in_lambda(&step, cloud.len() as f64, cloud.dim(), &lambda_grid(lg.as_deref())?)?;
                    emit(out.as_deref(), |w| curve.write_csv(w))
                }
            }
        }
        Command::Eecc {
            dist,
            d,
            method,
            lambda_grid: lg,
            m,
            seed,
            out,
        } => {
            let model = DensityModel::parse(&dist, d)?;
            let dim = d.unwrap_or(model.dim());
            let provenance = match method {
                Method::Closed => Provenance::ClosedForm,
                Method::Quadrature => Provenance::Quadrature,
                Method::Montecarlo => Provenance::MonteCarlo,
            };
            let lc = LimitCurve::evaluate(&model, dim, provenance, &lambda_grid(lg.as_deref())?, m, seed)?;
            emit(out.as_deref(), |w| lc.write_csv(w))
        }
        Command::Invert {
            curve_dist,
            curve_file,
            d,
            grid: grid_spec,
            nodes,
            reconstruct_radial: radial_out,
            out,
        } => {
            check_dim(d)?;
            let (eecc, ymax) = match (curve_dist, curve_file) {
                (Some(name), _) => {
                    let model = DensityModel::parse(&name, None).or_else(|e| {
                        if name.trim_start().starts_with("uniform-box") {
                            DensityModel::parse(&name, Some(1))
                        } else {
                            Err(e)
                        }
                    })?;
                    let eecc = Eecc::catalog(&model).map_err(|e| match e {
                        Error::ClosedFormUnavailable(m) => {
                            Error::Unsupported(format!("inversion of {m}: its limit curve has no analytic expansion"))
                        }
                        e => e,
                    })?;
                    (eecc, Some(model.sup()))
                }
                (None, Some(path)) => (read_curve_file(&path)?, None),
                (None, None) => return Err(Error::InvalidArgument("one of --curve-dist, --curve-file is required".into())),
            };
            let levels = match grid_spec {
                Some(s) => grid::parse(&s)?,
                None => grid::linear(0.0, ymax.unwrap_or(1.0), ymax.unwrap_or(1.0) / 200.0)?,
            };
            let excess = match d {
                1 => invert_excess_1d(&eecc.curve(), &levels, nodes)?,
                _ => invert_excess_2d(&eecc, &levels, nodes)?,
            };
            emit(out.as_deref(), |w| excess.write_csv(w))?;
            if let Some(p) = radial_out {
                let profile = reconstruct_radial(&excess, d, None)?;
                emit(Some(&p), |w| profile.write_csv(w))?;
            }
            Ok(())
        }
        Command::Experiment { config, out_dir } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::InvalidArgument(format!("{}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let dir = match out_dir.or_else(|| cfg.output_dir.clone()) {
                Some(d) => d,
                None => default_output_dir(&cfg)?,
            };
            let result = run_experiment(&cfg)?;
            result.write_dir(&dir)?;
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let record = if is_excess_csv(&a)? && is_excess_csv(&b)? {
                let f = GridFunction::read_csv(open(&a)?).map_err(|e| with_path(&a, e))?;
                let g = GridFunction::read_csv(open(&b)?).map_err(|e| with_path(&b, e))?;
                json!({ "kind": "excess-mass", "ks_distance": ks_excess(&f, &g)? })
            } else {
                let ca = LambdaCurve::read_csv(open(&a)?).map_err(|e| with_path(&a, e))?;
                let cb = LambdaCurve::read_csv(open(&b)?).map_err(|e| with_path(&b, e))?;
                let c = compare_curves(&ca, &cb)?;
                json!({
                    "kind": "curve",
                    "sup_distance": c.sup_distance,
                    "l1_distance": c.l1_distance,
                    "argmax_lambda": c.argmax,
                    "points": c.points,
                })
            };
            emit(out.as_deref(), |w| {
                writeln!(w, "{}", serde_json::to_string_pretty(&record)?)?;
                Ok(())
            })
        }
        Command::Plot { inputs, out } => {
            let mut series = Vec::with_capacity(inputs.len());
            for p in &inputs {
                let text = fs::read_to_string(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
                let label = p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                series.push(plot::Series::parse(&label, &text).map_err(|e| with_path(p, e))?);
            }
            fs::write(out, plot::render(&series)?)?;
            Ok(())
        }
    }
}

/// First non-comment line of an excess-mass grid is the `y,value` header.
fn is_excess_csv(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let header = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    Ok(header.is_some_and(|h| h.split(',').next().is_some_and(|c| c.trim() == "y")))
}

/// A JSON file holds an exponential-Laurent formula. Anything else is read
/// as a tabulated curve, which cannot be continued into the complex plane;
/// it is refused with the pre-check verdict when that fails and as
/// unsupported otherwise.
fn read_curve_file(path: &Path) -> Result<Eecc> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let e = ExpLaurent::from_json(&text)?;
        return Ok(Eecc::Expansion(e, path.display().to_string()));
    }
    let curve = LambdaCurve::read_csv(text.as_bytes()).map_err(|e| with_path(path, e))?;
    smoothness_precheck(&curve)?;
    Err(Error::Unsupported(
        "tabulated curves cannot be evaluated on the inversion contour; supply an exponential-Laurent JSON formula".into(),
    ))
}

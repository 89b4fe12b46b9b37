use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use isolab::error::{Error, Result};
use isolab::export::{
    euclidean_taut_spot_check, export_mesh, write_focal_circle_csv, write_point_cloud_csv,
    write_spectrum_csv,
};
use isolab::family::{catalog, verify_family, IsoparametricFamily};
use isolab::focal::{
    circular_gaps, exp_param_check, focal_circle_rows, focal_dimension_estimate,
    focal_points_along_normal, DEFAULT_NEIGHBOR_RADIUS,
};
use isolab::level_set::sample_points;
use isolab::morse::{
    draw_pole, focal_tautness_report, tightness_report, totally_focal_probe, MorseConfig,
};
use isolab::shape::{isoparametric_check, spectrum_at};
use isolab::sphere::SpherePoint;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "isolab",
    version,
    about = "Numerical checks for isoparametric hypersurfaces in spheres"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// great-sphere, clifford, cartan-cubic, nomizu-quartic or user-polynomial
    #[arg(long, default_value = "clifford")]
    family: String,
    /// Family parameters as a JSON object
    #[arg(long, default_value = "{}")]
    params: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Obj,
}

#[derive(Subcommand)]
enum Command {
    /// PDE residuals of the polynomial on random points of the ball of radius 2
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Constancy of principal curvatures on one level
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Focal spacing, normal exponential identity and focal dimensions
    Focal {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 720)]
        resolution: usize,
    },
    /// Critical point counts of distance functions on a level
    Tight {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value_t = 100)]
        poles: usize,
    },
    /// Critical point counts of distance functions on a focal submanifold
    TautFocal {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        side: i8,
        #[arg(long, default_value_t = 50)]
        poles: usize,
    },
    /// Degeneracy of critical points for regular and focal poles
    TotallyFocal {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value_t = 50)]
        poles: usize,
        #[arg(long, default_value_t = 10)]
        focal_poles: usize,
    },
    /// Stereographic OBJ mesh of a level torus in S³ (CSV point cloud otherwise)
    ExportMesh {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        level: f64,
        /// Comma-separated ambient coordinates; random non-focal pole when absent
        #[arg(long, allow_hyphen_values = true)]
        pole: Option<String>,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Also run the Euclidean distance check with this many centers
        #[arg(long)]
        centers: Option<usize>,
    },
    /// V along normal circles of sampled base points, as CSV
    ExportCurves {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        level: f64,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 720)]
        resolution: usize,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownFamily(_)
            | Error::Params(_)
            | Error::Json(_)
            | Error::Contract(_)
            | Error::DimensionMismatch { .. }
            | Error::Io(_)
            | Error::Csv(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn family(common: &Common) -> std::result::Result<(IsoparametricFamily, Value), Failure> {
    let params: Value = serde_json::from_str(&common.params)
        .map_err(|e| Failure::Usage(format!("--params is not valid JSON: {e}")))?;
    Ok((catalog(&common.family, &params)?, params))
}

fn regular_level(s: f64) -> std::result::Result<(), Failure> {
    if s > -1.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "--level must lie in (-1, 1), got {s}"
        )))
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn format_or(
    common: &Common,
    default: Format,
    allowed: &[Format],
) -> std::result::Result<Format, Failure> {
    let f = common.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure::Usage(
            "output format not supported by this subcommand".into(),
        ))
    }
}

fn emit<T: Serialize>(
    common: &Common,
    command: &str,
    config: Value,
    report: &T,
    pass: bool,
) -> Result<()> {
    let payload = json!({
        "command": command,
        "config": config,
        "report": report,
        "pass": pass,
    });
    let mut w = sink(&common.out)?;
    serde_json::to_writer_pretty(&mut w, &payload)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn base_config(common: &Common, fam: &IsoparametricFamily, params: &Value) -> Value {
    json!({
        "family": fam.label(),
        "params": params,
        "seed": common.seed,
        "g": fam.g(),
        "m1": fam.m1(),
        "m2": fam.m2(),
        "ambient_dim": fam.ambient_dim(),
        "xi_convention": "xi points toward increasing V",
    })
}

fn with(mut config: Value, extra: Value) -> Value {
    if let (Value::Object(base), Value::Object(more)) = (&mut config, extra) {
        base.extend(more);
    }
    config
}

fn parse_pole(text: &str, dim: usize) -> std::result::Result<SpherePoint, Failure> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("--pole: {e}")))?;
    if coords.len() != dim {
        return Err(Failure::Usage(format!(
            "--pole needs {dim} coordinates, got {}",
            coords.len()
        )));
    }
    SpherePoint::from_slice(&coords).map_err(Failure::from)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Verify { common, samples } => {
            format_or(&common, Format::Json, &[Format::Json])?;
            let (fam, params) = family(&common)?;
            let report = verify_family(&fam, samples, common.seed);
            let config = with(
                base_config(&common, &fam, &params),
                json!({ "samples": samples }),
            );
            emit(&common, "verify", config, &report, report.pass)?;
            Ok(report.pass)
        }
        Command::Spectrum {
            common,
            level,
            samples,
            tol,
        } => {
            let format = format_or(&common, Format::Json, &[Format::Json, Format::Csv])?;
            regular_level(level)?;
            let (fam, params) = family(&common)?;
            let report = isoparametric_check(&fam, level, samples, common.seed, tol)?;
            if format == Format::Csv {
                write_spectrum_csv(&report, sink(&common.out)?)?;
            } else {
                let config = with(
                    base_config(&common, &fam, &params),
                    json!({ "level": level, "samples": samples, "tol": tol }),
                );
                emit(&common, "spectrum", config, &report, report.pass)?;
            }
            Ok(report.pass)
        }
        Command::Focal {
            common,
            level,
            samples,
            tol,
            resolution,
        } => {
            let format = format_or(&common, Format::Json, &[Format::Json, Format::Csv])?;
            regular_level(level)?;
            let (fam, params) = family(&common)?;
            let g = fam.g() as f64;
            let bases = sample_points(&fam, level, samples, common.seed)?;
            let mut spacing_error: f64 = 0.0;
            let mut exp_error: f64 = 0.0;
            let mut circles = Vec::new();
            for sp in &bases {
                let spec = spectrum_at(&fam, sp)?;
                let pts = focal_points_along_normal(&fam, sp, &spec)?;
                for gap in circular_gaps(&pts) {
                    spacing_error = spacing_error.max((gap - std::f64::consts::PI / g).abs());
                }
                exp_error = exp_error.max(exp_param_check(&fam, sp, resolution)?);
                if format == Format::Csv {
                    circles.push(focal_circle_rows(&fam, sp, resolution)?);
                }
            }
            let mut dims = Vec::new();
            for side in [1i8, -1] {
                let est = focal_dimension_estimate(
                    &fam,
                    side,
                    200,
                    DEFAULT_NEIGHBOR_RADIUS,
                    common.seed,
                )?;
                dims.push(json!({
                    "side": side,
                    "estimated": est.dimension,
                    "expected": fam.focal_dimension(side),
                    "singular_values": est.singular_values,
                }));
            }
            let dims_ok = dims.iter().all(|d| d["estimated"] == d["expected"]);
            let pass = spacing_error < 1e-7 && exp_error < tol && dims_ok;
            if format == Format::Csv {
                write_focal_circle_csv(&circles, sink(&common.out)?)?;
            } else {
                let config = with(
                    base_config(&common, &fam, &params),
                    json!({ "level": level, "samples": samples, "tol": tol, "resolution": resolution }),
                );
                let report = json!({
                    "max_spacing_error": spacing_error,
                    "max_exp_param_error": exp_error,
                    "dimensions": dims,
                });
                emit(&common, "focal", config, &report, pass)?;
            }
            Ok(pass)
        }
        Command::Tight {
            common,
            level,
            poles,
        } => {
            format_or(&common, Format::Json, &[Format::Json])?;
            regular_level(level)?;
            let (fam, params) = family(&common)?;
            let report =
                tightness_report(&fam, level, poles, common.seed, &MorseConfig::default())?;
            let config = with(
                base_config(&common, &fam, &params),
                json!({ "level": level, "poles": poles }),
            );
            emit(&common, "tight", config, &report, report.pass)?;
            Ok(report.pass)
        }
        Command::TautFocal {
            common,
            side,
            poles,
        } => {
            format_or(&common, Format::Json, &[Format::Json])?;
            if side != 1 && side != -1 {
                return Err(Failure::Usage(format!(
                    "--side must be 1 or -1, got {side}"
                )));
            }
            let (fam, params) = family(&common)?;
            let report =
                focal_tautness_report(&fam, side, poles, common.seed, &MorseConfig::default())?;
            let config = with(
                base_config(&common, &fam, &params),
                json!({ "side": side, "poles": poles }),
            );
            emit(&common, "taut-focal", config, &report, report.pass)?;
            Ok(report.pass)
        }
        Command::TotallyFocal {
            common,
            level,
            poles,
            focal_poles,
        } => {
            format_or(&common, Format::Json, &[Format::Json])?;
            regular_level(level)?;
            let (fam, params) = family(&common)?;
            let report = totally_focal_probe(
                &fam,
                level,
                poles,
                focal_poles,
                common.seed,
                &MorseConfig::default(),
            )?;
            let config = with(
                base_config(&common, &fam, &params),
                json!({ "level": level, "poles": poles, "focal_poles": focal_poles }),
            );
            emit(&common, "totally-focal", config, &report, report.pass)?;
            Ok(report.pass)
        }
        Command::ExportMesh {
            common,
            level,
            pole,
            resolution,
            centers,
        } => {
            regular_level(level)?;
            let (fam, params) = family(&common)?;
            let pole = match pole {
                Some(text) => parse_pole(&text, fam.ambient_dim())?,
                None => draw_pole(&fam, common.seed),
            };
            if fam.ambient_dim() != 4 || fam.g() != 2 {
                format_or(&common, Format::Csv, &[Format::Csv])?;
                let count = resolution * resolution;
                let points: Vec<SpherePoint> = sample_points(&fam, level, count, common.seed)?
                    .into_iter()
                    .map(|sp| sp.x)
                    .collect();
                write_point_cloud_csv(&points, sink(&common.out)?)?;
                return Ok(true);
            }
            format_or(&common, Format::Obj, &[Format::Obj])?;
            let export = export_mesh(&fam, level, &pole, resolution)?;
            if let Some(w) = &export.warning {
                eprintln!("warning: {w}");
            }
            let mut out = sink(&common.out)?;
            export.mesh.write_obj(&mut out)?;
            out.flush().map_err(Error::from)?;
            let mut pass = true;
            if let Some(n) = centers {
                let report = euclidean_taut_spot_check(&fam, level, &pole, n, common.seed)?;
                pass = report.pass;
                let config = with(
                    base_config(&common, &fam, &params),
                    json!({ "level": level, "pole": pole.to_vec(), "centers": n }),
                );
                let summary = json!({ "config": config, "report": report, "pass": pass });
                eprintln!(
                    "{}",
                    serde_json::to_string_pretty(&summary).map_err(Error::from)?
                );
            }
            Ok(pass)
        }
        Command::ExportCurves {
            common,
            level,
            samples,
            resolution,
        } => {
            format_or(&common, Format::Csv, &[Format::Csv])?;
            regular_level(level)?;
            let (fam, _) = family(&common)?;
            let circles = sample_points(&fam, level, samples, common.seed)?
                .iter()
                .map(|sp| focal_circle_rows(&fam, sp, resolution))
                .collect::<Result<Vec<_>>>()?;
            write_focal_circle_csv(&circles, sink(&common.out)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

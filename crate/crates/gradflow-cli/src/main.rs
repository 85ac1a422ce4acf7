//! Command-line front end: flag/file configuration, pipeline invocation,
//! report rendering, and exit-code mapping.
//!
//! Exit codes: 0 for any completed analysis (UNKNOWN verdicts included),
//! 2 for user-input errors (grammar, variables, configuration, equivalence
//! map), 3 for internal inconsistencies between certified invariants
//! (reported with a diagnostic dump), 1 for everything else.

use clap::{Args, Parser, Subcommand};
use gradflow::pipeline::PipelineError;
use gradflow::report::{ReportFormat, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gradflow",
    version,
    about = "Decides whether the gradient flow of a polynomial germ has infinitely many \
             trajectories converging to the origin, and whether the stable set has \
             non-empty interior",
    after_help = "Environment: RAYON_NUM_THREADS caps the worker-thread count; no other \
                  environment variable is consulted."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis pipeline on one polynomial germ
    Analyze(Box<AnalyzeArgs>),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Polynomial text in the tool grammar, or a path to a file holding it
    #[arg(long)]
    poly: Option<String>,

    /// Comma-separated ordered variable names, e.g. x,y or x,y,z
    #[arg(long)]
    vars: Option<String>,

    /// Comma-separated strictly decreasing sweep radii
    /// [default: 0.25,0.125,0.0625,0.03125]
    #[arg(long)]
    radii: Option<String>,

    /// Sphere mesh refinement level [default: 5]
    #[arg(long = "mesh-level")]
    mesh_level: Option<u32>,

    /// Extra adaptive subdivision depth for sign-indeterminate cells
    /// [default: 6]
    #[arg(long = "max-extra-levels")]
    max_extra_levels: Option<u32>,

    /// Certified-measure fraction required for certified summaries, in (0,1]
    /// [default: 0.9]
    #[arg(long = "certified-threshold")]
    certified_threshold: Option<f64>,

    /// Run the numerical trajectory census (advisory evidence only)
    #[arg(long)]
    census: bool,

    /// Census seed-grid refinement level [default: 6]
    #[arg(long = "census-grid-level")]
    census_grid_level: Option<u32>,

    /// Census seed-sphere radius [default: 0.125]
    #[arg(long = "census-radius")]
    census_radius: Option<f64>,

    /// Compute the Milnor number (exact rational arithmetic)
    #[arg(long)]
    milnor: bool,

    /// Milnor truncation-degree budget [default: 12]
    #[arg(long = "max-truncation")]
    max_truncation: Option<u32>,

    /// Compute the local degree of -grad f on a small sphere
    #[arg(long)]
    degree: bool,

    /// Right-equivalence map components (comma-separated polynomials); the
    /// analyzed germ becomes poly composed with this map, and transferable
    /// certified criteria carry over from the source germ
    #[arg(long)]
    equiv: Option<String>,

    /// Write the rendered report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Emit sign-map CSV/PPM files and trajectory traces into this directory
    #[arg(long = "emit-plots")]
    emit_plots: Option<PathBuf>,

    /// Report rendering: json or markdown [default: json]
    #[arg(long)]
    format: Option<String>,

    /// Newton starts for the sphere critical-point search [default: 64]
    #[arg(long = "critical-attempts")]
    critical_attempts: Option<usize>,

    /// key=value configuration file ('#' comments); command-line flags
    /// override file entries
    #[arg(long)]
    config: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Io(String),
    Pipeline(PipelineError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Pipeline(e) => e.exit_code().clamp(0, 255) as u8,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
            CliError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Analyze(args) = cli.command;
    match run_analyze(*args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let CliError::Pipeline(p) = &err {
                if let Some(dump) = p.diagnostic_dump() {
                    eprintln!("invariant bundle at the point of contradiction:\n{dump}");
                }
            }
            ExitCode::from(err.exit_code())
        }
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let config = build_config(&args)?;
    let report = gradflow::pipeline::run_pipeline(&config).map_err(CliError::Pipeline)?;
    let rendered = match config.format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    match &config.output_path {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

/// Key=value entries from a config file, in file order.
fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value, got '{raw}'",
                path.display(),
                lineno + 1
            )));
        };
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(CliError::Usage(format!(
            "config key '{key}': expected a boolean, got '{other}'"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))
}

fn parse_radii(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("radius '{}': {e}", s.trim())))
        })
        .collect()
}

fn parse_vars(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Builds the run configuration: defaults, then config-file entries, then
/// command-line flags (highest precedence).
fn build_config(args: &AnalyzeArgs) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::new("", Vec::new());
    let mut poly: Option<String> = None;
    let mut vars: Option<Vec<String>> = None;

    if let Some(path) = &args.config {
        for (key, value) in parse_config_file(path)? {
            match key.as_str() {
                "poly" => poly = Some(value),
                "vars" => vars = Some(parse_vars(&value)),
                "radii" => config.radii = parse_radii(&value)?,
                "mesh-level" => config.mesh_level = parse_num(&key, &value)?,
                "max-extra-levels" => config.max_extra_levels = parse_num(&key, &value)?,
                "certified-threshold" => config.certified_threshold = parse_num(&key, &value)?,
                "census" => config.census = parse_bool(&key, &value)?,
                "census-grid-level" => config.census_grid_level = parse_num(&key, &value)?,
                "census-radius" => config.census_radius = parse_num(&key, &value)?,
                "milnor" => config.milnor = parse_bool(&key, &value)?,
                "max-truncation" => config.max_truncation = parse_num(&key, &value)?,
                "degree" => config.degree = parse_bool(&key, &value)?,
                "equiv" => config.equivalence_map = Some(value),
                "out" => config.output_path = Some(PathBuf::from(value)),
                "emit-plots" => config.plot_dir = Some(PathBuf::from(value)),
                "format" => {
                    config.format = value.parse::<ReportFormat>().map_err(CliError::Usage)?
                }
                "critical-attempts" => config.critical_search_attempts = parse_num(&key, &value)?,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown config key '{other}' in {}",
                        path.display()
                    )))
                }
            }
        }
    }

    if let Some(p) = &args.poly {
        poly = Some(p.clone());
    }
    if let Some(v) = &args.vars {
        vars = Some(parse_vars(v));
    }
    if let Some(r) = &args.radii {
        config.radii = parse_radii(r)?;
    }
    if let Some(v) = args.mesh_level {
        config.mesh_level = v;
    }
    if let Some(v) = args.max_extra_levels {
        config.max_extra_levels = v;
    }
    if let Some(v) = args.certified_threshold {
        config.certified_threshold = v;
    }
    if args.census {
        config.census = true;
    }
    if let Some(v) = args.census_grid_level {
        config.census_grid_level = v;
    }
    if let Some(v) = args.census_radius {
        config.census_radius = v;
    }
    if args.milnor {
        config.milnor = true;
    }
    if let Some(v) = args.max_truncation {
        config.max_truncation = v;
    }
    if args.degree {
        config.degree = true;
    }
    if let Some(m) = &args.equiv {
        config.equivalence_map = Some(m.clone());
    }
    if let Some(p) = &args.out {
        config.output_path = Some(p.clone());
    }
    if let Some(p) = &args.emit_plots {
        config.plot_dir = Some(p.clone());
    }
    if let Some(f) = &args.format {
        config.format = f.parse::<ReportFormat>().map_err(CliError::Usage)?;
    }
    if let Some(v) = args.critical_attempts {
        config.critical_search_attempts = v;
    }

    let poly = poly.ok_or_else(|| {
        CliError::Usage("missing polynomial: pass --poly or a config file with poly=".to_string())
    })?;
    config.polynomial_source = resolve_poly_source(&poly)?;
    config.variables = vars.ok_or_else(|| {
        CliError::Usage("missing variables: pass --vars or a config file with vars=".to_string())
    })?;
    Ok(config)
}

/// `--poly` accepts either literal polynomial text or a path to a file
/// containing it; a readable file wins (polynomial texts are never valid
/// paths to existing files in practice).
fn resolve_poly_source(poly: &str) -> Result<String, CliError> {
    let path = Path::new(poly);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        return Ok(text.trim().to_string());
    }
    Ok(poly.to_string())
}

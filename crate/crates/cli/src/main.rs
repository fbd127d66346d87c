mod commands;
mod inputs;
mod output;
mod published;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Spatial weights, spatial-dependence diagnostics, spatial regression and
/// spillover effects.
#[derive(Debug, Parser)]
#[command(name = "spatialspill", version, about)]
pub struct Cli {
    /// Seed for permutations, Monte-Carlo draws and simulation.
    #[arg(long, global = true, default_value_t = 20240101)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SPATIALSPILL_THREADS")]
    pub threads: Option<usize>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Build or summarize a spatial weights matrix.
    #[command(subcommand)]
    Weights(WeightsCommand),
    /// Descriptive statistics, correlations and group contrasts.
    Describe(DescribeArgs),
    /// Global Moran's I with a permutation test.
    Moran(MoranArgs),
    /// Residual Moran and Lagrange-multiplier tests on an OLS fit.
    Diagnose(DiagnoseArgs),
    /// Fit a model from the spatial regression family.
    Fit(FitArgs),
    /// Direct, indirect and total effects of a saved fit.
    Effects(EffectsArgs),
    /// Local Moran's I cluster labels.
    Lisa(LisaArgs),
    /// Simulate data on a regular lattice.
    Simulate(SimulateArgs),
    /// Run the full pipeline on the community life-satisfaction data and
    /// compare with the published estimates.
    Reproduce(ReproduceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Weights(WeightsCommand::Build(_)) => "weights build",
            Command::Weights(WeightsCommand::Summary(_)) => "weights summary",
            Command::Describe(_) => "describe",
            Command::Moran(_) => "moran",
            Command::Diagnose(_) => "diagnose",
            Command::Fit(_) => "fit",
            Command::Effects(_) => "effects",
            Command::Lisa(_) => "lisa",
            Command::Simulate(_) => "simulate",
            Command::Reproduce(_) => "reproduce",
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsCommand {
    /// Contiguity or inverse-distance weights from polygon geometry.
    Build(WeightsBuildArgs),
    /// Neighbour counts and islands of an existing weights file.
    Summary(WeightsSummaryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Queen,
    Rook,
    Invdist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Row,
    Spectral,
    None,
}

impl From<Norm> for spatialspill::Normalization {
    fn from(n: Norm) -> Self {
        match n {
            Norm::Row => Self::Row,
            Norm::Spectral => Self::Spectral,
            Norm::None => Self::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ols,
    Slx,
    Sem,
    Sar,
    Sdem,
    Sdm,
    Sac,
    Gns,
}

impl From<Model> for spatialspill::ModelKind {
    fn from(m: Model) -> Self {
        use spatialspill::ModelKind as K;
        match m {
            Model::Ols => K::Ols,
            Model::Slx => K::Slx,
            Model::Sem => K::Sem,
            Model::Sar => K::Sar,
            Model::Sdem => K::Sdem,
            Model::Sdm => K::Sdm,
            Model::Sac => K::Sac,
            Model::Gns => K::Gns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Se {
    Robust,
    Classical,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Attribute table (CSV) with one row per region.
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding region ids.
    #[arg(long, default_value = "region_id")]
    pub id_column: String,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsArgs {
    /// Weights file: `.gal` neighbour list or `.wm` triple list.
    #[arg(long)]
    pub weights: PathBuf,
    /// Normalization applied after loading (default: row for `.gal`, as stored for `.wm`).
    #[arg(long, value_enum)]
    pub normalize: Option<Norm>,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsBuildArgs {
    /// GeoJSON feature collection of Polygon / MultiPolygon regions.
    #[arg(long)]
    pub geometry: PathBuf,
    /// Feature property holding the region id.
    #[arg(long, default_value = "region_id")]
    pub id_property: String,
    #[arg(long, value_enum)]
    pub rule: Rule,
    /// Contiguity order (graph distance <= order).
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Use graph distance exactly equal to `--order`.
    #[arg(long)]
    pub exact_order: bool,
    /// Default: row for contiguity, spectral for inverse distance.
    #[arg(long, value_enum)]
    pub normalize: Option<Norm>,
    /// Coordinate snapping grid for shared-boundary detection.
    #[arg(long, default_value_t = spatialspill::weights::DEFAULT_SNAP)]
    pub snap_tolerance: f64,
    /// Output `.gal` (contiguity only) or `.wm`.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsSummaryArgs {
    #[command(flatten)]
    pub weights: WeightsArgs,
    /// JSON report.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Variables to summarize (default: every column except `--group-by`).
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// 0/1 column splitting the sample for Welch contrasts.
    #[arg(long)]
    pub group_by: Option<String>,
    /// Output directory for variables.csv, correlations.csv and contrasts.csv.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MoranArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub weights: WeightsArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub vars: Vec<String>,
    #[arg(long, default_value_t = 999)]
    pub permutations: usize,
    /// Also write Moran scatter data (z, lag z) per region.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// One or more weights files; each gets its own battery of tests.
    #[arg(long, required = true, num_args = 1..)]
    pub weights: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub normalize: Option<Norm>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// Regressors that also enter as spatial lags.
    #[arg(long, value_delimiter = ',')]
    pub durbin: Vec<String>,
    /// Required for every model except OLS.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub normalize: Option<Norm>,
    #[arg(long, value_enum, default_value = "robust")]
    pub se: Se,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EffectsArgs {
    /// fit.json written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    pub weights: WeightsArgs,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LisaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub weights: WeightsArgs,
    #[arg(long)]
    pub var: String,
    #[arg(long, default_value_t = 999)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Geometry for the GeoJSON layer written with `--geojson`.
    #[arg(long, requires = "geojson")]
    pub geometry: Option<PathBuf>,
    #[arg(long, default_value = "region_id")]
    pub id_property: String,
    #[arg(long, requires = "geometry")]
    pub geojson: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Lattice size as ROWSxCOLS.
    #[arg(long, value_parser = parse_lattice)]
    pub lattice: (usize, usize),
    #[arg(long, value_enum, default_value = "rook")]
    pub rule: Rule,
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Coefficients of x1, x2, ...
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    /// Coefficients of the lagged regressors listed in `--durbin`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    /// Lagged regressors (default: the first `len(theta)` of x1, x2, ...).
    #[arg(long, value_delimiter = ',')]
    pub durbin: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// DATA.csv,W.gal[,LATTICE.geojson]
    #[arg(long, short, value_delimiter = ',', required = true)]
    pub out: Vec<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    /// Public-use community life-satisfaction table (CSV).
    #[arg(long, env = "SPATIALSPILL_DATA")]
    pub data: Option<PathBuf>,
    /// Community boundaries (GeoJSON) matching the table ids.
    #[arg(long, env = "SPATIALSPILL_GEOMETRY")]
    pub geometry: Option<PathBuf>,
    #[arg(long, env = "SPATIALSPILL_ID_COLUMN", default_value = "region_id")]
    pub id_column: String,
    /// Defaults to `--id-column`.
    #[arg(long, env = "SPATIALSPILL_ID_PROPERTY")]
    pub id_property: Option<String>,
    #[arg(long, default_value = "life_satisfaction")]
    pub response: String,
    /// NAME=IDS.txt: rerun the pipeline on the listed regions (one id per line).
    #[arg(long, value_parser = parse_subsample)]
    pub subsample: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn parse_lattice(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
    match (parse(r), parse(c)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(format!("expected positive ROWSxCOLS, got `{s}`")),
    }
}

fn parse_subsample(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got `{s}`"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

/// Error kinds that are the caller's fault rather than the data's.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("MissingExternalData: {0}")]
    MissingExternalData(String),
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if parts.last().is_some_and(|p| p.ends_with(&text)) {
            continue;
        }
        parts.push(text);
    }
    parts.join(": ").replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("error: invalid arguments");
            eprintln!("{}", line.trim_end());
            return ExitCode::from(2);
        }
    };

    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = matches!(e.downcast_ref::<CliError>(), Some(CliError::Usage(_)));
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

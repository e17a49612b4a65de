mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::RegionSelector;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<speckle::Error> for CliError {
    fn from(e: speckle::Error) -> Self {
        match e {
            speckle::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "speckle", version, about = "G0 speckle statistics: sampling, fitting, region contrast and Monte Carlo studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McMode {
    Size,
    Power,
    Estimator,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridChoice {
    Size,
    Power,
    Estimator,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a (possibly contaminated) G0 sample.
    Sample(SampleArgs),
    /// Maximum-likelihood fit of a sample.
    Fit(FitArgs),
    /// Compare two samples with the divergence and Kolmogorov-Smirnov tests.
    Contrast(ContrastArgs),
    /// Run Monte Carlo studies.
    Mc(McArgs),
    /// Histogram goodness of fit under the fitted G0 and gamma laws.
    Gof(GofArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, conflicts_with = "mean", required_unless_present = "mean")]
    pub gamma: Option<f64>,
    /// Mean intensity, converted to gamma = -mean (1 + alpha).
    #[arg(long)]
    pub mean: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub looks: f64,
    #[arg(long, conflicts_with_all = ["width", "height"], required_unless_present_all = ["width", "height"])]
    pub n: Option<usize>,
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100.0)]
    pub scale_factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SampleFormat::Csv)]
    pub format: SampleFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    /// Number of looks; taken from the file when omitted.
    #[arg(long)]
    pub looks: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Window `x,y,width,height` of an image.
    #[arg(long)]
    pub region: Option<RegionSelector>,
    /// Histogram bins for the SSE columns (default: ceil(sqrt(n))).
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContrastArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long)]
    pub looks: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "kl,t,b,ag,ks")]
    pub tests: Vec<speckle::DistanceKind>,
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
    #[arg(long)]
    pub region_first: Option<RegionSelector>,
    #[arg(long)]
    pub region_second: Option<RegionSelector>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(value_enum)]
    pub mode: McMode,
    /// JSON scenario file; required except in grid mode.
    #[arg(long, required_unless_present = "grid")]
    pub config: Option<PathBuf>,
    /// Generated grid for `grid` mode.
    #[arg(long, value_enum)]
    pub grid: Option<GridChoice>,
    /// Override the replication count of every scenario.
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<speckle::DistanceKind>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "SPECKLE_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub looks: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub region: Option<RegionSelector>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => commands::sample(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Contrast(a) => commands::contrast(&a),
        Command::Mc(a) => commands::mc(&a),
        Command::Gof(a) => commands::gof(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("speckle: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

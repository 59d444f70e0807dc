//! `partgeom`: builds complexes, metrics and curvature reports from partition,
//! ensemble and network files, writing JSON reports and CSV plot data.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use partgeom::Error;

#[derive(Parser, Debug, Serialize)]
#[command(name = "partgeom", version, about = "Geometry of partition models and ReLU networks")]
pub struct Cli {
    /// Seed for every Monte Carlo computation; required by those paths.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving the report files.
    #[arg(long, short, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Largest nerve simplex dimension.
    #[arg(long, global = true, default_value_t = 3)]
    pub max_dim: usize,
    /// Geometric tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct DensityArgs {
    /// Edge density interpolation: arithmetic, harmonic, lift or geometric.
    #[arg(long, default_value = "arithmetic")]
    pub density_scheme: String,
    /// Exponent of the density-weighted edge length, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Weight of the Laplacian smoothness penalty on the density.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_density: f64,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Nerve complex with face measures.
    Nerve {
        #[arg(long)]
        partition: PathBuf,
        /// Also run a seeded Monte Carlo coverage and volume check.
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Star Gram matrices, condition numbers and edge lengths.
    Metric {
        #[arg(long)]
        partition: PathBuf,
    },
    /// Simplicial spline smoothing of per-cell values.
    Spline {
        #[arg(long)]
        partition: PathBuf,
        /// JSON array of per-cell values (default: cell predictors).
        #[arg(long)]
        values: Option<PathBuf>,
        /// Penalty `p,k,lambda`; repeatable (default `0,1,1`).
        #[arg(long = "penalty", value_parser = parse_penalty)]
        penalties: Vec<[f64; 3]>,
    },
    /// Penalized density estimate and density-weighted graph.
    Density {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        density: DensityArgs,
    },
    /// Vertex and edge curvatures, regularizer and energy.
    Curvature {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// JSON array of per-cell function values (default: predictors, then density).
        #[arg(long)]
        values: Option<PathBuf>,
        /// Explicit radii (default: 1 and 2 times the mean edge length).
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// functional_mean, functional_angle, functional_level, dist or tri.
        #[arg(long, default_value = "functional_mean")]
        vertex_measure: String,
        /// Weights of the mean, level, direct and response components.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        density: DensityArgs,
    },
    /// Overlay refinement, co-occurrence and ensemble metric of a tree ensemble.
    Ensemble {
        /// JSON array of partitions.
        #[arg(long)]
        trees: PathBuf,
        /// Member weights eta^b; uniform when omitted.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
    },
    /// Incremental metric updates, energy and spectral health along a boosting run.
    BoostMonitor {
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
        /// Fixed ensemble weights lambda_p (default: from the first member).
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Backward refined-partition sequence of a ReLU network.
    NnAnalyze {
        /// Network JSON: {"layers":[{"W":[[..]],"b":[..]}]}.
        #[arg(long)]
        weights: PathBuf,
        /// CSV of input points.
        #[arg(long)]
        data: PathBuf,
        /// `auto` (bounding box of the data) or a JSON file {"bounds":[[lo,hi],..]}.
        #[arg(long, default_value = "auto")]
        domain: String,
    },
    /// Nerve, metric, spectra and penalties in one report, plus density and
    /// curvature when data is given.
    Report {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        density: DensityArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Nerve { .. } => "nerve",
            Command::Metric { .. } => "metric",
            Command::Spline { .. } => "spline",
            Command::Density { .. } => "density",
            Command::Curvature { .. } => "curvature",
            Command::Ensemble { .. } => "ensemble",
            Command::BoostMonitor { .. } => "boost-monitor",
            Command::NnAnalyze { .. } => "nn-analyze",
            Command::Report { .. } => "report",
        }
    }
}

fn parse_penalty(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [p, k, l] = parts.as_slice() else {
        return Err("expected p,k,lambda".into());
    };
    let int = |x: &str| x.parse::<usize>().map(|v| v as f64).map_err(|e| format!("'{x}': {e}"));
    let lambda: f64 = l.parse().map_err(|e| format!("'{l}': {e}"))?;
    Ok([int(p)?, int(k)?, lambda])
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::Input(_) | Error::Io(_) => 3,
        Error::Internal(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                e.exit();
            }
            output::report_error("arguments", &Error::Parse(e.to_string()), 2, None);
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            output::report_error(cli.command.name(), &e, code, Some(&cli.out));
            ExitCode::from(code)
        }
    }
}

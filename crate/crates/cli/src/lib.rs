//! The `trendmap` pipeline as subcommands: `ingest` joins the raw traces
//! into usage records, `train` fits a map for one aspect, `analyze` exports
//! U-matrix, trend clusters, feature maps and feature clusters, and
//! `simulate` fits a mixture to a map and samples synthetic users.

mod analyze;
pub mod config;
pub mod error;
mod ingest;
mod output;
mod simulate;
mod train;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::PipelineConfig;
pub use error::{CliError, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Aspect {
    /// Users × web domains.
    Domain,
    /// Users × buildings.
    Location,
    /// Users × (domain, building) matrices.
    Multi,
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aspect::Domain => "domain",
            Aspect::Location => "location",
            Aspect::Multi => "multi",
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "trendmap", version, about = "Model wireless users' Internet access trends with self-organizing maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join flows, leases, sessions and the domain map into usage records.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Train a map for one aspect from the usage records.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Aspect::Domain)]
        aspect: Aspect,
    },
    /// Export U-matrix, trend clusters, feature maps and feature clusters.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Feature map to draw (repeatable); defaults to the configured list or all.
        #[arg(long = "feature")]
        features: Vec<String>,
    },
    /// Fit a Gaussian mixture to a map and sample synthetic users.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Number of synthetic users.
        #[arg(short = 'n')]
        n: usize,
        /// What vector features name; inferred from a `som_<aspect>` file name.
        #[arg(long, value_enum)]
        aspect: Option<Aspect>,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    Ok(config)
}

/// Runs one subcommand.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { common } => ingest::run(&load_config(&common)?),
        Command::Train { common, aspect } => train::run(&load_config(&common)?, aspect),
        Command::Analyze {
            common,
            model,
            features,
        } => analyze::run(&load_config(&common)?, &model, &features),
        Command::Simulate {
            common,
            model,
            n,
            aspect,
        } => {
            if n == 0 {
                return Err(CliError::usage("-n must be at least 1"));
            }
            simulate::run(&load_config(&common)?, &model, n, aspect)
        }
    }
}

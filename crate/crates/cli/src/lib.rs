//! `hydrotier` command-line pipeline.
//!
//! Every subcommand reads one JSON config (optional), applies flag overrides
//! and writes its outputs under `--out`. Outputs carry a provenance record
//! (tool version, seed, SHA-256 of the resolved config) and are removed again
//! if the command fails.

pub mod commands;
pub mod config;
pub mod provenance;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hydrotier::{Error, Result};

use crate::config::{Overrides, PipelineConfig};
use crate::provenance::Provenance;

#[derive(Debug, Parser)]
#[command(
    name = "hydrotier",
    version,
    about = "Ordinal household water/income prediction pipeline"
)]
pub struct Cli {
    /// JSON pipeline config; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic city (households, rasters, class maps).
    Synth,
    /// Build feature tables from households, rasters and segmentation maps.
    Ingest,
    /// Download satellite / street-view imagery listed in the image manifest.
    Fetch,
    /// Fit an ordinal model on all labelled rows.
    Train,
    /// Cross-validate every configured setting and learner.
    Evaluate,
    /// Grid search over GBDT hyperparameters.
    Tune,
    /// Predict class probabilities with a trained model.
    Predict,
    /// Render a markdown summary and SVG charts from evaluation reports.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ingest => "ingest",
            Command::Fetch => "fetch",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Tune => "tune",
            Command::Predict => "predict",
            Command::Report => "report",
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.resolve(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    })
}

/// Runs one subcommand and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(cli)?;
    let prov = Provenance::new(cli.command.name(), &cfg)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs.filter(|&j| j > 0) {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let outputs = match cli.command {
            Command::Synth => commands::synth(&cfg, &prov)?,
            Command::Ingest => commands::ingest(&cfg, &prov)?.0,
            Command::Fetch => commands::fetch(&cfg, &prov)?,
            Command::Train => commands::train(&cfg, &prov)?,
            Command::Evaluate => commands::evaluate(&cfg, &prov)?,
            Command::Tune => commands::tune(&cfg, &prov)?,
            Command::Predict => commands::predict(&cfg, &prov)?,
            Command::Report => commands::report(&cfg, &prov)?,
        };
        Ok(outputs.commit())
    })
}

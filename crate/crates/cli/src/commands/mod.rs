//! Subcommand implementations.

mod data;
mod model;
mod report;

use std::collections::HashMap;

use hydrotier::dataset::io::{read_features, read_households};
use hydrotier::dataset::{join_features, label_households, FeatureMatrix, FeatureSource, JoinPolicy, LabeledDataset};
use hydrotier::ordinal::OrdinalModel;
use hydrotier::{Error, EvalReport, Result, Target};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::provenance::Provenance;

pub use data::{fetch, ingest, synth, IngestSummary, SourceCoverage};
pub use model::{evaluate, predict, train, tune, SUMMARY_FILE};
pub use report::report;

/// On-disk form of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub provenance: Provenance,
    pub target: Target,
    pub sources: Vec<FeatureSource>,
    pub config: PipelineConfig,
    pub model: OrdinalModel,
}

/// On-disk form of one evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDoc {
    pub provenance: Provenance,
    pub setting: String,
    pub sources: Vec<FeatureSource>,
    pub target: Target,
    pub config: PipelineConfig,
    pub report: EvalReport,
}

/// Inner join of the requested sources' feature files.
pub fn load_features(cfg: &PipelineConfig, sources: &[FeatureSource]) -> Result<FeatureMatrix> {
    let mats = sources
        .iter()
        .map(|&s| {
            let path = cfg.features_path(s);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "feature file {} for source `{s}` not found (run `ingest` first)",
                    path.display()
                )));
            }
            read_features(&path, Some(&s.prefix()))
        })
        .collect::<Result<Vec<_>>>()?;
    let joined = join_features(&mats, JoinPolicy::Inner)?;
    info!(
        "{} rows x {} columns from {:?}",
        joined.n_rows(),
        joined.n_cols(),
        sources
    );
    Ok(joined)
}

/// Features of every household that reports the configured target.
pub fn load_labeled(cfg: &PipelineConfig, sources: &[FeatureSource]) -> Result<LabeledDataset> {
    let households = read_households(cfg.paths.households.as_ref().expect("resolved"))?;
    let labels: HashMap<String, usize> = label_households(&households, cfg.target, cfg.binning())?
        .into_iter()
        .collect();
    let features = load_features(cfg, sources)?;
    let (idx, y): (Vec<usize>, Vec<usize>) = features
        .row_ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| labels.get(id).map(|&l| (i, l)))
        .unzip();
    let dropped = features.n_rows() - idx.len();
    if dropped > 0 {
        warn!("{dropped} feature rows have no {:?} label and are skipped", cfg.target);
    }
    if idx.is_empty() {
        return Err(Error::Data("no labelled rows remain after joining features".into()));
    }
    LabeledDataset::new(features.select_rows(&idx), y, cfg.binning().clone())
}

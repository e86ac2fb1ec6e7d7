//! Pipeline configuration: one JSON document, overridable by flags.

use std::path::{Path, PathBuf};

use hydrotier::dataset::{FeatureSource, OrdinalBinning, SynthSpec, Target};
use hydrotier::geoimagery::FetchConfig;
use hydrotier::resampling::SmoteSpec;
use hydrotier::tuning::GridSpec;
use hydrotier::{BinaryLearnerSpec, Error, Result};
use serde::{Deserialize, Serialize};

/// Input and output locations. Anything left unset resolves under `out_dir`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub households: Option<PathBuf>,
    /// Where `features_<source>.csv` files are written and read.
    pub features_dir: Option<PathBuf>,
    /// Raster files in column order; empty means every `*.asc` in `raster_dir`.
    pub rasters: Vec<PathBuf>,
    pub raster_dir: Option<PathBuf>,
    /// `id,path` list of class-index PNGs.
    pub segmentation_manifest: Option<PathBuf>,
    /// Precomputed proportions, used when the manifest is absent.
    pub segmentation_summaries: Option<PathBuf>,
    /// `id,kind,lat,lng[,heading]` list for `fetch`.
    pub image_manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub size: usize,
    pub classes: usize,
    pub signal_strength: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 2000,
            classes: 4,
            signal_strength: 0.9,
        }
    }
}

/// A named subset of feature sources compared by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub name: String,
    pub sources: Vec<FeatureSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub target: Target,
    /// Defaults to the target's standard bins.
    pub binning: Option<OrdinalBinning>,
    pub paths: Paths,
    /// Sources used by `train`, and by `evaluate` when `settings` is empty.
    pub sources: Vec<FeatureSource>,
    pub settings: Vec<Setting>,
    pub learner: BinaryLearnerSpec,
    /// Learners compared by `evaluate`; empty means just `learner`.
    pub learners: Vec<BinaryLearnerSpec>,
    /// `null` disables over-sampling.
    pub smote: Option<SmoteSpec>,
    pub cv_folds: usize,
    pub grid: Option<GridSpec>,
    pub synth: SynthConfig,
    pub fetch: FetchConfig,
    pub profile_features: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            seed: 42,
            target: Target::Water,
            binning: None,
            paths: Paths::default(),
            sources: vec![FeatureSource::Survey, FeatureSource::Seg, FeatureSource::Geo],
            settings: Vec::new(),
            learner: BinaryLearnerSpec::gbdt_leaf_wise(),
            learners: Vec::new(),
            smote: Some(SmoteSpec::default()),
            cv_folds: 5,
            grid: None,
            synth: SynthConfig::default(),
            fetch: FetchConfig::default(),
            profile_features: ["geo:nightlight", "geo:pop_density", "geo:building_sqft"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies flag overrides and fills every unset path. The result is what
    /// gets hashed into provenance and embedded in reports.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out_dir = out.clone();
        }
        let out = self.out_dir.clone();
        let p = &mut self.paths;
        p.households.get_or_insert_with(|| out.join("households.csv"));
        p.features_dir.get_or_insert_with(|| out.clone());
        p.raster_dir.get_or_insert_with(|| out.join("rasters"));
        p.segmentation_manifest
            .get_or_insert_with(|| out.join("segmentation").join("manifest.csv"));
        p.segmentation_summaries
            .get_or_insert_with(|| out.join("segmentation").join("summaries.csv"));
        p.image_manifest.get_or_insert_with(|| out.join("image_manifest.csv"));
        p.model.get_or_insert_with(|| out.join("model.json"));
        if self.binning.is_none() {
            self.binning = Some(self.target.default_binning());
        }
        if self.learners.is_empty() {
            self.learners = vec![self.learner.clone()];
        }
        if self.settings.is_empty() {
            self.settings = vec![Setting {
                name: setting_name(&self.sources),
                sources: self.sources.clone(),
            }];
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("at least one feature source must be enabled".into()));
        }
        for s in &self.settings {
            if s.sources.is_empty() {
                return Err(Error::Config(format!("setting `{}` has no sources", s.name)));
            }
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-+".contains(c)) {
                return Err(Error::Config(format!(
                    "setting name `{}` must be [A-Za-z0-9_+-]+",
                    s.name
                )));
            }
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be >= 2".into()));
        }
        self.learner.validate()?;
        for l in &self.learners {
            l.validate()?;
        }
        if let Some(s) = &self.smote {
            s.validate()?;
        }
        Ok(())
    }

    pub fn binning(&self) -> &OrdinalBinning {
        self.binning.as_ref().expect("resolved config has a binning")
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            size: self.synth.size,
            classes: self.synth.classes,
            seed: self.seed,
            signal_strength: self.synth.signal_strength,
        }
    }

    pub fn features_path(&self, source: FeatureSource) -> PathBuf {
        self.paths
            .features_dir
            .as_ref()
            .expect("resolved")
            .join(source.file_name())
    }
}

pub fn setting_name(sources: &[FeatureSource]) -> String {
    sources.iter().map(|s| s.name()).collect::<Vec<_>>().join("+")
}

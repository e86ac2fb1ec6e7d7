use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use hydrotier::dataset::io::{read_features, read_households, write_features_to};
use hydrotier::dataset::{generate_synthetic_city, one_hot_encode, FeatureMatrix, FeatureSource};
use hydrotier::geoimagery::{
    build_geo_features, fetch_images, load_class_index_png, read_manifest, segmentation_features,
    segmentation_proportions, write_fetch_log, CovariateRaster, FetchStatus, HttpSource, NUM_SEG_CLASSES,
};
use hydrotier::{Error, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::provenance::{Outputs, Provenance};

pub fn synth(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let city = generate_synthetic_city(&cfg.synth_spec())?;
    let out = &cfg.out_dir;
    let mut outputs = Outputs::new();
    outputs.track(out.join("households.csv"));
    for r in &city.rasters {
        outputs.track(out.join("rasters").join(format!("{}.asc", r.name)));
    }
    for (id, _) in &city.class_maps {
        outputs.track(out.join("segmentation").join(format!("{id}.png")));
    }
    outputs.track(out.join("segmentation").join("manifest.csv"));
    outputs.track(out.join("segmentation").join("summaries.csv"));
    city.write_to(out, Some(&prov.comment()))?;
    info!(
        "synthetic city: {} households, {} rasters, {} class maps in {}",
        city.households.len(),
        city.rasters.len(),
        city.class_maps.len(),
        out.display()
    );
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCoverage {
    pub rows: usize,
    pub columns: usize,
    /// Households that have a row in this source.
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub provenance: Provenance,
    pub households: usize,
    pub sources: BTreeMap<FeatureSource, SourceCoverage>,
    pub warnings: Vec<String>,
}

fn raster_paths(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    if !cfg.paths.rasters.is_empty() {
        return Ok(cfg.paths.rasters.clone());
    }
    let dir = cfg.paths.raster_dir.as_ref().expect("resolved");
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("asc")))
        .collect();
    v.sort();
    Ok(v)
}

fn segmentation_from_manifest(path: &Path) -> Result<FeatureMatrix> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut summaries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::Data(format!("{}:{line}: expected id,path", path.display())));
        }
        let png = base.join(&rec[1]);
        let img = load_class_index_png(&png).map_err(|e| Error::Data(format!("{}:{line}: {e}", path.display())))?;
        summaries.push(segmentation_proportions(&rec[0], &img)?);
    }
    segmentation_features(&summaries)
}

fn check_seg_summaries(m: &FeatureMatrix, src: &Path) -> Result<()> {
    if m.n_cols() != NUM_SEG_CLASSES {
        return Err(Error::Data(format!(
            "{}: expected {NUM_SEG_CLASSES} class columns, found {}",
            src.display(),
            m.n_cols()
        )));
    }
    for (i, row) in m.values().iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if row.iter().any(|v| v.is_nan() || *v < 0.0) || (s - 1.0).abs() > 1e-6 {
            return Err(Error::Data(format!(
                "{}: row {} ({}) is not a proportion vector (sum {s})",
                src.display(),
                i + 1,
                m.row_ids()[i]
            )));
        }
    }
    Ok(())
}

pub fn ingest(cfg: &PipelineConfig, prov: &Provenance) -> Result<(Outputs, IngestSummary)> {
    let households = read_households(cfg.paths.households.as_ref().expect("resolved"))?;
    let ids: HashSet<&str> = households.iter().map(|h| h.id.as_str()).collect();
    let mut warnings = Vec::new();
    let mut tables: Vec<(FeatureSource, FeatureMatrix)> = Vec::new();

    let attrs: BTreeSet<String> = households.iter().flat_map(|h| h.attributes.keys().cloned()).collect();
    if attrs.is_empty() {
        warnings.push("households carry no survey attributes; survey features skipped".into());
    } else {
        tables.push((
            FeatureSource::Survey,
            one_hot_encode(&households, &attrs.into_iter().collect::<Vec<_>>())?,
        ));
    }

    let rpaths = raster_paths(cfg)?;
    if rpaths.is_empty() {
        warnings.push("no rasters found; geo features skipped".into());
    } else {
        let rasters = rpaths
            .iter()
            .map(|p| {
                let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("raster");
                CovariateRaster::read(name, p)
            })
            .collect::<Result<Vec<_>>>()?;
        tables.push((FeatureSource::Geo, build_geo_features(&households, &rasters)?));
    }

    let manifest = cfg.paths.segmentation_manifest.as_ref().expect("resolved");
    let summaries = cfg.paths.segmentation_summaries.as_ref().expect("resolved");
    if manifest.exists() {
        tables.push((FeatureSource::Seg, segmentation_from_manifest(manifest)?));
    } else if summaries.exists() {
        let m = read_features(summaries, Some(&FeatureSource::Seg.prefix()))?;
        check_seg_summaries(&m, summaries)?;
        tables.push((FeatureSource::Seg, m));
    } else {
        warnings.push("no segmentation manifest or summaries; seg features skipped".into());
    }

    let mut outputs = Outputs::new();
    let mut sources = BTreeMap::new();
    let comment = prov.comment();
    for (src, m) in &tables {
        let covered = m.row_ids().iter().filter(|id| ids.contains(id.as_str())).count();
        let unknown = m.n_rows() - covered;
        if unknown > 0 {
            warnings.push(format!("{src}: {unknown} rows have ids not in households"));
        }
        if covered < households.len() {
            warnings.push(format!(
                "{src}: {} of {} households have no row",
                households.len() - covered,
                households.len()
            ));
        }
        info!(
            "{src}: {} rows x {} columns, covers {covered}/{} households",
            m.n_rows(),
            m.n_cols(),
            households.len()
        );
        let mut buf = Vec::new();
        write_features_to(&mut buf, m, Some(&comment))?;
        outputs.write(&cfg.features_path(*src), &buf)?;
        sources.insert(
            *src,
            SourceCoverage {
                rows: m.n_rows(),
                columns: m.n_cols(),
                covered,
            },
        );
    }
    for w in &warnings {
        warn!("{w}");
    }
    let summary = IngestSummary {
        provenance: prov.clone(),
        households: households.len(),
        sources,
        warnings,
    };
    outputs.write_json(&cfg.out_dir.join("ingest_report.json"), &summary)?;
    Ok((outputs, summary))
}

pub fn fetch(cfg: &PipelineConfig, prov: &Provenance) -> Result<Outputs> {
    let manifest_path = cfg.paths.image_manifest.as_ref().expect("resolved");
    let manifest = read_manifest(manifest_path, cfg.fetch.satellite_zoom)?;
    let mut fc = cfg.fetch.clone();
    if fc.cache_dir.is_relative() {
        fc.cache_dir = cfg.out_dir.join(&fc.cache_dir);
    }
    let key = fc.api_key()?;
    let source = HttpSource::new(Duration::from_secs(fc.timeout_secs));
    let log = fetch_images(&manifest, &fc, key.as_deref(), &source)?;
    let count = |s: FetchStatus| log.iter().filter(|e| e.status == s).count();
    info!(
        "fetch: {} ok, {} cached, {} failed",
        count(FetchStatus::Ok),
        count(FetchStatus::Cached),
        count(FetchStatus::Failed)
    );
    let path = cfg.out_dir.join("fetch_log.csv");
    let mut outputs = Outputs::new();
    outputs.track(path.clone());
    write_fetch_log(&path, &log, Some(&prov.comment()))?;
    Ok(outputs)
}

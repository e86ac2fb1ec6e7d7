//! Synthetic city generator.
//!
//! Each household gets a latent affluence score `z ~ N(0, 1)`. Covariate
//! rasters, street-view class maps and survey attributes are noisy functions
//! of `z`. Targets are monotone in `s*z + (1-s)*eps`, where `s` is the signal
//! strength, and are spread across the binning's classes by rank so that every
//! class receives the same share of households.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{io, AttributeValue, HouseholdRecord, OrdinalBinning, Target};
use crate::error::{Error, Result};
use crate::geoimagery::{
    segmentation_features, segmentation_proportions, ClassIndexImage, CovariateRaster, GeoPoint, SegmentationSummary,
    IGNORE_INDEX,
};
use crate::seed;

/// Lower-left corner of the synthetic city (Hubballi).
const ORIGIN_LNG: f64 = 75.05;
const ORIGIN_LAT: f64 = 15.30;
const CELLSIZE: f64 = 0.0005;
const NODATA: f64 = -9999.0;
const IMAGE_WIDTH: u32 = 32;
const IMAGE_HEIGHT: u32 = 24;

fn default_classes() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub size: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub seed: u64,
    pub signal_strength: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 100 {
            return Err(Error::Config(format!("synthetic size {} < 100", self.size)));
        }
        if self.classes < 2 {
            return Err(Error::Config("synthetic city needs at least 2 classes".into()));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::Config(format!(
                "signal_strength {} outside [0, 1]",
                self.signal_strength
            )));
        }
        Ok(())
    }

    /// Income and water binnings with `classes` classes. Four classes use the
    /// real brackets and tariff tiers.
    pub fn binnings(&self) -> Result<(OrdinalBinning, OrdinalBinning)> {
        if self.classes == 4 {
            Ok((OrdinalBinning::income(), OrdinalBinning::water()))
        } else {
            Ok((
                OrdinalBinning::uniform("income", self.classes, 10_000.0, "Rs")?,
                OrdinalBinning::uniform("water", self.classes, 8.0, "KL")?,
            ))
        }
    }
}

pub struct SyntheticCity {
    pub households: Vec<HouseholdRecord>,
    /// Latent affluence per household (not written to disk).
    pub latent: Vec<f64>,
    pub income_binning: OrdinalBinning,
    pub water_binning: OrdinalBinning,
    pub rasters: Vec<CovariateRaster>,
    /// `(household id, class-index map)`.
    pub class_maps: Vec<(String, ClassIndexImage)>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Covariate value for a cell occupied by latent score `z`.
fn covariates(z: f64, rng: &mut ChaCha8Rng) -> [f64; 4] {
    let nightlight = (2.0 + 0.8 * (z + 0.3 * normal(rng))).exp();
    let pop_density = (9.0 - 0.4 * (z + 0.3 * normal(rng))).exp();
    let building_sqft = 600.0 * (0.5 * (z + 0.3 * normal(rng))).exp();
    let building_height = 3.0 + 6.0 / (1.0 + (-(z + 0.5 * normal(rng))).exp());
    [nightlight, pop_density, building_sqft, building_height]
}

const RASTER_NAMES: [&str; 4] = ["nightlight", "pop_density", "building_sqft", "building_height"];

/// `(class id, base logit, affluence slope)` of the street-scene mixture.
const SCENE: [(u8, f64, f64); 14] = [
    (1, 1.0, 0.8),    // building
    (2, 1.0, -0.3),   // sky
    (0, 0.3, 0.4),    // wall
    (4, 0.5, -0.5),   // tree
    (6, 1.0, 0.0),    // road
    (11, 0.0, 0.4),   // sidewalk
    (20, -1.5, 0.6),  // car
    (12, -2.0, 0.0),  // person
    (17, -1.0, -0.3), // plant
    (25, -0.5, 0.3),  // house
    (13, -0.5, -0.6), // earth
    (32, -1.0, 0.0),  // fence
    (93, -1.5, 0.0),  // pole
    (43, -1.8, 0.2),  // signboard
];

fn class_map(z: f64, rng: &mut ChaCha8Rng) -> ClassIndexImage {
    let logits: Vec<f64> = SCENE
        .iter()
        .map(|&(_, base, slope)| base + slope * z + 0.3 * normal(rng))
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let n = (IMAGE_WIDTH * IMAGE_HEIGHT) as usize;
    let mut pixels = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random::<f64>() < 0.02 {
            pixels.push(IGNORE_INDEX);
            continue;
        }
        let mut u = rng.random::<f64>() * total;
        let mut cls = SCENE[SCENE.len() - 1].0;
        for (w, &(c, _, _)) in weights.iter().zip(SCENE.iter()) {
            if u < *w {
                cls = c;
                break;
            }
            u -= w;
        }
        pixels.push(cls);
    }
    ClassIndexImage::new(IMAGE_WIDTH, IMAGE_HEIGHT, pixels).expect("valid synthetic map")
}

/// Maps scores to target values so that classes are balanced by rank and the
/// value is monotone in the score.
fn rank_targets(scores: &[f64], binning: &OrdinalBinning) -> Vec<f64> {
    let n = scores.len();
    let k = binning.num_classes();
    let edges = binning.edges();
    let top = edges.last().copied().unwrap_or(1.0) * 2.0;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let p = (rank as f64 + 0.5) / n as f64 * k as f64;
        let j = (p.floor() as usize).min(k - 1);
        let frac = p - j as f64;
        let lo = if j == 0 { 0.0 } else { edges[j - 1] };
        let hi = if j == k - 1 { top } else { edges[j] };
        out[i] = lo + frac * (hi - lo);
    }
    out
}

pub fn generate_synthetic_city(spec: &SynthSpec) -> Result<SyntheticCity> {
    spec.validate()?;
    let (income_binning, water_binning) = spec.binnings()?;
    let n = spec.size;
    let s = spec.signal_strength;
    let mut rng = seed::rng(spec.seed);

    let latent: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();

    // one household per raster cell
    let side = ((n as f64 * 1.3).sqrt().ceil() as usize).max(2);
    let mut cells: Vec<usize> = (0..side * side).collect();
    cells.shuffle(&mut rng);
    let occupant: BTreeMap<usize, usize> = cells[..n].iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut grids = vec![vec![NODATA; side * side]; RASTER_NAMES.len()];
    for cell in 0..side * side {
        let z = match occupant.get(&cell) {
            Some(&i) => latent[i],
            None => normal(&mut rng),
        };
        let vals = covariates(z, &mut rng);
        let occupied = occupant.contains_key(&cell);
        for (g, v) in grids.iter_mut().zip(vals) {
            g[cell] = v;
        }
        // sporadic gaps: building height is the patchiest layer
        let gap = rng.random::<f64>();
        if (occupied && gap < 0.01) || (!occupied && gap < 0.05) {
            grids[3][cell] = NODATA;
        }
    }
    let rasters = RASTER_NAMES
        .iter()
        .zip(grids)
        .map(|(name, values)| CovariateRaster::new(*name, side, side, ORIGIN_LNG, ORIGIN_LAT, CELLSIZE, NODATA, values))
        .collect::<Result<Vec<_>>>()?;

    let income_scores: Vec<f64> = latent.iter().map(|z| s * z + (1.0 - s) * normal(&mut rng)).collect();
    let water_scores: Vec<f64> = latent.iter().map(|z| s * z + (1.0 - s) * normal(&mut rng)).collect();
    let income = rank_targets(&income_scores, &income_binning);
    let water = rank_targets(&water_scores, &water_binning);

    let width = (n.to_string().len()).max(4);
    let mut households = Vec::with_capacity(n);
    let mut class_maps = Vec::with_capacity(n);
    let raster0 = &rasters[0];
    for (i, &cell) in cells[..n].iter().enumerate() {
        let z = latent[i];
        let id = format!("RR{:0width$}", i + 1);
        let (row, col) = (cell / side, cell % side);
        let c = raster0.cell_center(row, col);
        let jitter = 0.3 * CELLSIZE;
        let location = GeoPoint::new(
            c.lat + rng.random_range(-jitter..jitter),
            c.lng + rng.random_range(-jitter..jitter),
        )?;

        let mut attributes = BTreeMap::new();
        let size = (4.5 - 0.6 * z + 1.2 * normal(&mut rng)).round().clamp(1.0, 12.0);
        attributes.insert("household_size".into(), AttributeValue::Numeric(size));
        let floors = (1.5 + 0.7 * z + 0.5 * normal(&mut rng)).round().clamp(1.0, 4.0);
        attributes.insert("floors".into(), AttributeValue::Numeric(floors));
        let w = z + 0.8 * normal(&mut rng);
        let property = if w < -1.0 {
            "slum"
        } else if w < 0.8 {
            "house"
        } else {
            "apartment"
        };
        attributes.insert("property_type".into(), AttributeValue::Categorical(property.into()));
        let w = z + 1.0 * normal(&mut rng);
        let roof = if w < -0.8 {
            "tin"
        } else if w < -0.1 {
            "asbestos"
        } else if w < 0.6 {
            "tile"
        } else {
            "concrete"
        };
        attributes.insert("roof".into(), AttributeValue::Categorical(roof.into()));
        let w = z + 1.0 * normal(&mut rng);
        let conn = if w < -0.5 {
            "15mm"
        } else if w < 1.0 {
            "20mm"
        } else {
            "25mm"
        };
        attributes.insert("connection_size".into(), AttributeValue::Categorical(conn.into()));
        let zone = 1 + (row * 4 / side) * 3 + (col * 3 / side);
        attributes.insert("dma_zone".into(), AttributeValue::Categorical(format!("DMA-{zone:02}")));

        households.push(HouseholdRecord {
            id: id.clone(),
            location,
            attributes,
            income_monthly: Some(income[i]),
            water_consumption: Some(water[i]),
        });
        class_maps.push((id, class_map(z, &mut rng)));
    }

    Ok(SyntheticCity {
        households,
        latent,
        income_binning,
        water_binning,
        rasters,
        class_maps,
    })
}

impl SyntheticCity {
    pub fn binning(&self, target: Target) -> &OrdinalBinning {
        match target {
            Target::Water => &self.water_binning,
            Target::Income => &self.income_binning,
        }
    }

    pub fn segmentation_summaries(&self) -> Result<Vec<SegmentationSummary>> {
        self.class_maps
            .iter()
            .map(|(id, img)| segmentation_proportions(id, img))
            .collect()
    }

    /// Writes the city in the on-disk layout consumed by ingestion:
    ///
    /// ```text
    /// households.csv
    /// rasters/<name>.asc
    /// segmentation/<id>.png
    /// segmentation/manifest.csv      id,path
    /// segmentation/summaries.csv     id,seg:<class>...
    /// ```
    pub fn write_to(&self, dir: &Path, comment: Option<&str>) -> Result<()> {
        let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(dir)?;
        io::write_households(&dir.join("households.csv"), &self.households, comment)?;
        let rdir = dir.join("rasters");
        mkdir(&rdir)?;
        for r in &self.rasters {
            r.write(&rdir.join(format!("{}.asc", r.name)))?;
        }
        let sdir = dir.join("segmentation");
        mkdir(&sdir)?;
        let mut manifest = String::from("id,path\n");
        for (id, img) in &self.class_maps {
            let name = format!("{id}.png");
            img.save_png(&sdir.join(&name))?;
            manifest.push_str(&format!("{id},{name}\n"));
        }
        let mpath = sdir.join("manifest.csv");
        std::fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
        let seg = segmentation_features(&self.segmentation_summaries()?)?;
        io::write_features(&sdir.join("summaries.csv"), &seg, comment)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: f64) -> SynthSpec {
        SynthSpec {
            size: 400,
            classes: 4,
            seed: 11,
            signal_strength: s,
        }
    }

    #[test]
    fn validates_spec() {
        let mut sp = spec(0.5);
        sp.size = 99;
        assert!(generate_synthetic_city(&sp).is_err());
        let sp = spec(1.2);
        assert!(generate_synthetic_city(&sp).is_err());
    }

    #[test]
    fn balanced_classes() {
        let city = generate_synthetic_city(&spec(0.7)).unwrap();
        for t in [Target::Water, Target::Income] {
            let b = city.binning(t);
            let mut counts = [0usize; 4];
            for h in &city.households {
                counts[b.bin(h.target(t).unwrap()).unwrap()] += 1;
            }
            assert_eq!(counts, [100; 4], "{t:?}");
        }
    }

    #[test]
    fn full_signal_is_monotone_in_latent() {
        let city = generate_synthetic_city(&spec(1.0)).unwrap();
        let mut idx: Vec<usize> = (0..city.latent.len()).collect();
        idx.sort_by(|&a, &b| city.latent[a].total_cmp(&city.latent[b]));
        for w in idx.windows(2) {
            let (a, b) = (&city.households[w[0]], &city.households[w[1]]);
            assert!(a.water_consumption.unwrap() <= b.water_consumption.unwrap());
            assert!(a.income_monthly.unwrap() <= b.income_monthly.unwrap());
        }
    }

    #[test]
    fn households_sample_their_own_cell() {
        let city = generate_synthetic_city(&spec(0.9)).unwrap();
        let r = &city.rasters[0];
        let mut cells = std::collections::HashSet::new();
        for h in &city.households {
            assert!(cells.insert(r.cell_of(h.location).unwrap()));
        }
    }

    #[test]
    fn byte_identical_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic_city(&spec(0.9))
            .unwrap()
            .write_to(a.path(), Some("x"))
            .unwrap();
        generate_synthetic_city(&spec(0.9))
            .unwrap()
            .write_to(b.path(), Some("x"))
            .unwrap();
        for rel in [
            "households.csv",
            "rasters/nightlight.asc",
            "segmentation/manifest.csv",
            "segmentation/summaries.csv",
            "segmentation/RR0001.png",
        ] {
            let x = std::fs::read(a.path().join(rel)).unwrap();
            let y = std::fs::read(b.path().join(rel)).unwrap();
            assert_eq!(x, y, "{rel}");
        }
    }
}

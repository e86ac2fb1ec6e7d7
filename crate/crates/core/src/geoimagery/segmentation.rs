use std::path::Path;

use image::{ColorType, GrayImage, ImageReader};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, FeatureSource};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Scene-parsing classes in a class-index map.
pub const NUM_SEG_CLASSES: usize = 150;
/// Pixel value for "no class" in class-index maps.
pub const IGNORE_INDEX: u8 = 255;

const ADE20K_CLASSES: [&str; NUM_SEG_CLASSES] = [
    "wall",
    "building",
    "sky",
    "floor",
    "tree",
    "ceiling",
    "road",
    "bed",
    "windowpane",
    "grass",
    "cabinet",
    "sidewalk",
    "person",
    "earth",
    "door",
    "table",
    "mountain",
    "plant",
    "curtain",
    "chair",
    "car",
    "water",
    "painting",
    "sofa",
    "shelf",
    "house",
    "sea",
    "mirror",
    "rug",
    "field",
    "armchair",
    "seat",
    "fence",
    "desk",
    "rock",
    "wardrobe",
    "lamp",
    "bathtub",
    "railing",
    "cushion",
    "base",
    "box",
    "column",
    "signboard",
    "chest_of_drawers",
    "counter",
    "sand",
    "sink",
    "skyscraper",
    "fireplace",
    "refrigerator",
    "grandstand",
    "path",
    "stairs",
    "runway",
    "case",
    "pool_table",
    "pillow",
    "screen_door",
    "stairway",
    "river",
    "bridge",
    "bookcase",
    "blind",
    "coffee_table",
    "toilet",
    "flower",
    "book",
    "hill",
    "bench",
    "countertop",
    "stove",
    "palm",
    "kitchen_island",
    "computer",
    "swivel_chair",
    "boat",
    "bar",
    "arcade_machine",
    "hovel",
    "bus",
    "towel",
    "light",
    "truck",
    "tower",
    "chandelier",
    "awning",
    "streetlight",
    "booth",
    "television_receiver",
    "airplane",
    "dirt_track",
    "apparel",
    "pole",
    "land",
    "bannister",
    "escalator",
    "ottoman",
    "bottle",
    "buffet",
    "poster",
    "stage",
    "van",
    "ship",
    "fountain",
    "conveyer_belt",
    "canopy",
    "washer",
    "plaything",
    "swimming_pool",
    "stool",
    "barrel",
    "basket",
    "waterfall",
    "tent",
    "bag",
    "minibike",
    "cradle",
    "oven",
    "ball",
    "food",
    "step",
    "tank",
    "trade_name",
    "microwave",
    "pot",
    "animal",
    "bicycle",
    "lake",
    "dishwasher",
    "screen",
    "blanket",
    "sculpture",
    "hood",
    "sconce",
    "vase",
    "traffic_light",
    "tray",
    "ashcan",
    "fan",
    "pier",
    "crt_screen",
    "plate",
    "monitor",
    "bulletin_board",
    "shower",
    "radiator",
    "glass",
    "clock",
    "flag",
];

/// Class names indexed by class id.
pub fn ade20k_class_names() -> &'static [&'static str; NUM_SEG_CLASSES] {
    &ADE20K_CLASSES
}

/// Single-channel class-index map: values `0..150` are classes, 255 is ignore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndexImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl ClassIndexImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != (width as usize) * (height as usize) {
            return Err(Error::Format(format!(
                "class-index image {width}x{height} with {} pixels",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .find(|&&p| p as usize >= NUM_SEG_CLASSES && p != IGNORE_INDEX)
        {
            return Err(Error::Format(format!(
                "class-index value {bad} outside 0..{NUM_SEG_CLASSES} and not {IGNORE_INDEX}"
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("dimensions checked at construction");
        img.save(path)?;
        Ok(())
    }
}

/// Loads an 8-bit single-channel PNG and validates its value range.
pub fn load_class_index_png(path: &Path) -> Result<ClassIndexImage> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()?;
    if img.color() != ColorType::L8 {
        return Err(Error::Format(format!(
            "{}: class-index map must be 8-bit single channel, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let g = img.into_luma8();
    let (w, h) = g.dimensions();
    ClassIndexImage::new(w, h, g.into_raw()).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Per-image fraction of non-ignore pixels assigned to each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub image_id: String,
    pub proportions: Vec<f64>,
}

pub fn segmentation_proportions(image_id: &str, image: &ClassIndexImage) -> Result<SegmentationSummary> {
    let mut counts = [0u64; NUM_SEG_CLASSES];
    let mut total = 0u64;
    for &p in &image.pixels {
        if p == IGNORE_INDEX {
            continue;
        }
        let idx = p as usize;
        if idx >= NUM_SEG_CLASSES {
            return Err(Error::Format(format!("class-index value {p} in image {image_id}")));
        }
        counts[idx] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Format(format!("image {image_id} has no labelled pixels")));
    }
    let t = total as f64;
    Ok(SegmentationSummary {
        image_id: image_id.to_string(),
        proportions: counts.iter().map(|&c| c as f64 / t).collect(),
    })
}

/// `seg:<class name>` feature table, one row per summary.
pub fn segmentation_features(summaries: &[SegmentationSummary]) -> Result<FeatureMatrix> {
    let prefix = FeatureSource::Seg.prefix();
    let columns = ADE20K_CLASSES.iter().map(|c| format!("{prefix}{c}")).collect();
    let mut data = Vec::with_capacity(summaries.len() * NUM_SEG_CLASSES);
    for s in summaries {
        if s.proportions.len() != NUM_SEG_CLASSES {
            return Err(Error::Data(format!(
                "segmentation summary {} has {} classes",
                s.image_id,
                s.proportions.len()
            )));
        }
        data.extend_from_slice(&s.proportions);
    }
    FeatureMatrix::new(
        summaries.iter().map(|s| s.image_id.clone()).collect(),
        columns,
        DenseMatrix::new(summaries.len(), NUM_SEG_CLASSES, data)?,
    )
}

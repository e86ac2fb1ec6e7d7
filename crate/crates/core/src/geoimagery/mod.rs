//! Imagery acquisition and geospatial covariates.

mod fetch;
pub mod mock;
mod raster;
mod segmentation;
mod tile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fetch::{
    fetch_images, read_manifest, write_fetch_log, FetchConfig, FetchLogEntry, FetchStatus, HttpSource, ImageKind,
    ImageRequest, ImageSource, SourceError,
};
pub use raster::{build_geo_features, sample_raster, CovariateRaster};
pub use segmentation::{
    ade20k_class_names, load_class_index_png, segmentation_features, segmentation_proportions, ClassIndexImage,
    SegmentationSummary, IGNORE_INDEX, NUM_SEG_CLASSES,
};
pub use tile::{point_to_tile, tile_center, TileCoord, MAX_MERCATOR_LAT, MAX_ZOOM};

/// WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lng: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lng: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lng) {
            return Err(Error::Domain(format!(
                "coordinate ({lat}, {lng}) outside [-90,90]x[-180,180]"
            )));
        }
        Ok(Self { lat, lng })
    }
}

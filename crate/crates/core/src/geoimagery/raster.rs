use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::GeoPoint;
use crate::dataset::{FeatureMatrix, FeatureSource, HouseholdRecord};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// A covariate grid in ESRI ASCII format. Cell values are stored row-major
/// starting from the northern-most row.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRaster {
    pub name: String,
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    /// Degrees.
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl CovariateRaster {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if !(cellsize > 0.0) {
            return Err(Error::Format(format!("raster {name}: cellsize must be > 0")));
        }
        if ncols == 0 || nrows == 0 || values.len() != ncols * nrows {
            return Err(Error::Format(format!(
                "raster {name}: {} values for a {ncols}x{nrows} grid",
                values.len()
            )));
        }
        Ok(Self {
            name,
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata,
            values,
        })
    }

    pub fn read(name: &str, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(name, &text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace().peekable();
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut x_center = false;
        let mut y_center = false;
        let mut cellsize = None;
        let mut nodata = -9999.0;
        while let Some(key) = tokens.peek() {
            if key.parse::<f64>().is_ok() {
                break;
            }
            let key = tokens.next().unwrap().to_ascii_lowercase();
            let val = tokens
                .next()
                .ok_or_else(|| Error::Format(format!("header key {key} has no value")))?;
            let num: f64 = val
                .parse()
                .map_err(|_| Error::Format(format!("header {key}: {val:?} is not a number")))?;
            match key.as_str() {
                "ncols" => ncols = Some(num as usize),
                "nrows" => nrows = Some(num as usize),
                "xllcorner" => xll = Some(num),
                "yllcorner" => yll = Some(num),
                "xllcenter" => {
                    xll = Some(num);
                    x_center = true;
                }
                "yllcenter" => {
                    yll = Some(num);
                    y_center = true;
                }
                "cellsize" => cellsize = Some(num),
                "nodata_value" => nodata = num,
                other => return Err(Error::Format(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("missing header key {k}"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
        if x_center {
            xll -= cellsize / 2.0;
        }
        if y_center {
            yll -= cellsize / 2.0;
        }
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Format(format!("cell value {t:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, ncols, nrows, xll, yll, cellsize, nodata, values)
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols {}", self.ncols);
        let _ = writeln!(s, "nrows {}", self.nrows);
        let _ = writeln!(s, "xllcorner {}", self.xllcorner);
        let _ = writeln!(s, "yllcorner {}", self.yllcorner);
        let _ = writeln!(s, "cellsize {}", self.cellsize);
        let _ = writeln!(s, "NODATA_value {}", self.nodata);
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ascii()).map_err(|e| Error::io(path, e))
    }

    /// `(row, col)` of the cell containing `point`, row 0 being the northern
    /// edge. `None` outside the grid.
    pub fn cell_of(&self, point: GeoPoint) -> Option<(usize, usize)> {
        let cx = ((point.lng - self.xllcorner) / self.cellsize).floor();
        let cy = ((point.lat - self.yllcorner) / self.cellsize).floor();
        if !(cx >= 0.0 && cy >= 0.0 && cx < self.ncols as f64 && cy < self.nrows as f64) {
            return None;
        }
        Some((self.nrows - 1 - cy as usize, cx as usize))
    }

    /// Centre of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        GeoPoint {
            lat: self.yllcorner + ((self.nrows - 1 - row) as f64 + 0.5) * self.cellsize,
            lng: self.xllcorner + (col as f64 + 0.5) * self.cellsize,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }
}

/// Nearest-cell value at `point`. Nodata cells and points outside the grid are
/// missing (`None`); the latter also log a warning.
pub fn sample_raster(raster: &CovariateRaster, point: GeoPoint) -> Option<f64> {
    let Some((r, c)) = raster.cell_of(point) else {
        warn!("point ({}, {}) outside raster {}", point.lat, point.lng, raster.name);
        return None;
    };
    let v = raster.get(r, c);
    (v != raster.nodata && !v.is_nan()).then_some(v)
}

/// One `geo:<raster name>` column per raster, in the given order.
pub fn build_geo_features(households: &[HouseholdRecord], rasters: &[CovariateRaster]) -> Result<FeatureMatrix> {
    let prefix = FeatureSource::Geo.prefix();
    let columns: Vec<String> = rasters.iter().map(|r| format!("{prefix}{}", r.name)).collect();
    let mut values = DenseMatrix::zeros(households.len(), rasters.len());
    for (i, h) in households.iter().enumerate() {
        for (j, r) in rasters.iter().enumerate() {
            values.set(i, j, sample_raster(r, h.location).unwrap_or(f64::NAN));
        }
    }
    FeatureMatrix::new(households.iter().map(|h| h.id.clone()).collect(), columns, values)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use proptest::prelude::*;

    fn grid3() -> CovariateRaster {
        CovariateRaster::new("t", 3, 3, 75.0, 15.0, 0.5, -9999.0, (1..=9).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn single_cell() {
        let r = CovariateRaster::new("one", 1, 1, 10.0, 20.0, 1.0, -9999.0, vec![7.0]).unwrap();
        assert_eq!(sample_raster(&r, GeoPoint { lat: 20.5, lng: 10.5 }), Some(7.0));
    }

    #[test]
    fn nodata_is_missing() {
        let r = CovariateRaster::new("one", 1, 1, 10.0, 20.0, 1.0, -1.0, vec![-1.0]).unwrap();
        assert_eq!(sample_raster(&r, GeoPoint { lat: 20.5, lng: 10.5 }), None);
    }

    #[test]
    fn nine_cell_centres() {
        let r = grid3();
        let mut got = Vec::new();
        for row in 0..3 {
            for col in 0..3 {
                got.push(sample_raster(&r, r.cell_center(row, col)).unwrap());
            }
        }
        assert_eq!(got, r.values);
        // top-left cell is the north-west corner
        assert_eq!(sample_raster(&r, GeoPoint { lat: 16.4, lng: 75.1 }), Some(1.0));
        assert_eq!(sample_raster(&r, GeoPoint { lat: 16.6, lng: 75.1 }), None);
    }

    #[test]
    fn parse_and_write() {
        let text = "NCOLS 2\nNROWS 1\nXLLCENTER 0.5\nYLLCORNER 0\nCELLSIZE 1\n3 4\n";
        let r = CovariateRaster::parse("p", text).unwrap();
        assert_eq!(r.xllcorner, 0.0);
        assert_eq!(r.nodata, -9999.0);
        let back = CovariateRaster::parse("p", &r.to_ascii()).unwrap();
        assert_eq!(back, r);
        assert!(
            CovariateRaster::parse("p", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n").is_err()
        );
        assert!(CovariateRaster::parse("p", "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0\n1\n").is_err());
    }

    #[test]
    fn geo_features_columns_and_missing() {
        let a = grid3();
        let mut b = grid3();
        b.name = "pop_density".into();
        b.values.iter_mut().for_each(|v| *v *= 10.0);
        let hh = |id: &str, lat, lng| HouseholdRecord {
            id: id.into(),
            location: GeoPoint { lat, lng },
            attributes: BTreeMap::new(),
            income_monthly: None,
            water_consumption: None,
        };
        let hs = [hh("in", 15.25, 75.25), hh("out", 0.0, 0.0)];
        let m = build_geo_features(&hs, &[b, a]).unwrap();
        assert_eq!(m.column_names(), ["geo:pop_density", "geo:t"]);
        assert_eq!(m.value(0, 0), Some(70.0));
        assert_eq!(m.value(0, 1), Some(7.0));
        assert_eq!(m.value(1, 0), None);
        assert_eq!(m.value(1, 1), None);
    }

    proptest! {
        #[test]
        fn matches_index_arithmetic(lat in 14.9f64..16.7, lng in 74.9f64..76.7) {
            let r = grid3();
            let cx = ((lng - r.xllcorner) / r.cellsize).floor();
            let cy = ((lat - r.yllcorner) / r.cellsize).floor();
            let expect = if (0.0..3.0).contains(&cx) && (0.0..3.0).contains(&cy) {
                Some(r.values[(2 - cy as usize) * 3 + cx as usize])
            } else {
                None
            };
            prop_assert_eq!(sample_raster(&r, GeoPoint { lat, lng }), expect);
        }
    }
}

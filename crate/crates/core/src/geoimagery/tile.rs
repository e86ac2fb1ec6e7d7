use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeoPoint;
use crate::error::{Error, Result};

/// Latitude limit of the square Web-Mercator world.
pub const MAX_MERCATOR_LAT: f64 = 85.051_128_779_806_59;
pub const MAX_ZOOM: u8 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileCoord {
    pub x: u32,
    pub y: u32,
    pub zoom: u8,
}

/// Slippy-map tile containing `point`.
pub fn point_to_tile(point: GeoPoint, zoom: u8) -> Result<TileCoord> {
    if zoom > MAX_ZOOM {
        return Err(Error::Domain(format!("zoom {zoom} exceeds {MAX_ZOOM}")));
    }
    if !(point.lat.abs() < MAX_MERCATOR_LAT) {
        return Err(Error::Domain(format!(
            "latitude {} beyond the Web-Mercator bound",
            point.lat
        )));
    }
    let n = f64::from(1u32 << zoom);
    let max = (1u32 << zoom) - 1;
    let x = ((point.lng + 180.0) / 360.0 * n).floor();
    let lat = point.lat.to_radians();
    let y = ((1.0 - lat.tan().asinh() / PI) / 2.0 * n).floor();
    Ok(TileCoord {
        x: (x.max(0.0) as u32).min(max),
        y: (y.max(0.0) as u32).min(max),
        zoom,
    })
}

/// Geographic centre of a tile (inverse of [`point_to_tile`] at the tile's
/// mid-point).
pub fn tile_center(tile: TileCoord) -> GeoPoint {
    let n = f64::from(1u32 << tile.zoom);
    let fx = (f64::from(tile.x) + 0.5) / n;
    let fy = (f64::from(tile.y) + 0.5) / n;
    GeoPoint {
        lat: (PI * (1.0 - 2.0 * fy)).sinh().atan().to_degrees(),
        lng: fx * 360.0 - 180.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lng: f64) -> GeoPoint {
        GeoPoint::new(lat, lng).unwrap()
    }

    #[test]
    fn origin_tiles() {
        assert_eq!(
            point_to_tile(p(0.0, 0.0), 0).unwrap(),
            TileCoord { x: 0, y: 0, zoom: 0 }
        );
        assert_eq!(
            point_to_tile(p(0.0, 0.0), 1).unwrap(),
            TileCoord { x: 1, y: 1, zoom: 1 }
        );
    }

    #[test]
    fn known_city_tile() {
        // Hubballi at zoom 19
        let t = point_to_tile(p(15.3647, 75.1240), 19).unwrap();
        let n = 2f64.powi(19);
        assert_eq!(t.x, ((75.1240 + 180.0) / 360.0 * n).floor() as u32);
    }

    #[test]
    fn out_of_domain() {
        assert!(point_to_tile(p(85.06, 0.0), 3).is_err());
        assert!(point_to_tile(p(0.0, 0.0), 23).is_err());
        assert_eq!(point_to_tile(p(0.0, 180.0), 2).unwrap().x, 3);
    }

    proptest! {
        #[test]
        fn monotone(lat in -85.0f64..85.0, lng in -180.0f64..180.0, dlat in 0.0f64..5.0, dlng in 0.0f64..10.0, z in 0u8..=22) {
            let a = point_to_tile(p(lat, lng), z).unwrap();
            let b = point_to_tile(p((lat + dlat).min(85.0), (lng + dlng).min(180.0)), z).unwrap();
            prop_assert!(b.x >= a.x);
            prop_assert!(b.y <= a.y);
        }

        #[test]
        fn center_round_trip(lat in -85.0f64..85.0, lng in -180.0f64..180.0, z in 0u8..=22) {
            let t = point_to_tile(p(lat, lng), z).unwrap();
            prop_assert_eq!(point_to_tile(tile_center(t), z).unwrap(), t);
        }
    }
}

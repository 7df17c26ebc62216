use serde::{Deserialize, Serialize};

use super::bbox::BBox;
use super::DetectionPx;
use crate::{Error, Result};

/// Mean lunar radius in meters.
pub const MOON_RADIUS_M: f64 = 1_737_400.0;

/// Equirectangular georeference of a mosaic: pixel `(0, 0)` sits at
/// `(lon_origin, lat_origin)`, x grows eastward and y southward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub lon_origin: f64,
    pub lat_origin: f64,
    pub meters_per_pixel: f64,
    #[serde(rename = "body_radius_m", default = "default_radius")]
    pub body_radius: f64,
}

fn default_radius() -> f64 {
    MOON_RADIUS_M
}

impl GeoRef {
    pub fn new(lon_origin: f64, lat_origin: f64, meters_per_pixel: f64) -> Result<Self> {
        let g = Self {
            lon_origin,
            lat_origin,
            meters_per_pixel,
            body_radius: MOON_RADIUS_M,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.meters_per_pixel > 0.0 && self.meters_per_pixel.is_finite()) {
            return Err(Error::arg("meters_per_pixel must be positive"));
        }
        if !(self.body_radius > 0.0 && self.body_radius.is_finite()) {
            return Err(Error::arg("body_radius must be positive"));
        }
        if !self.lon_origin.is_finite() || !(self.lat_origin.abs() <= 90.0) {
            return Err(Error::arg("georef origin out of range"));
        }
        Ok(())
    }

    /// Degrees of arc covered by one pixel.
    pub fn degrees_per_pixel(&self) -> f64 {
        self.meters_per_pixel / meters_per_degree(self)
    }
}

/// Arc length of one degree along a great circle, `2πR / 360`.
pub fn meters_per_degree(g: &GeoRef) -> f64 {
    2.0 * std::f64::consts::PI * g.body_radius / 360.0
}

/// A detected crater in geographic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGeo {
    pub lon: f64,
    pub lat: f64,
    pub diameter_km: f64,
    pub score: f64,
}

impl DetectionGeo {
    pub fn validate(&self) -> Result<()> {
        if !(-180.0..180.0).contains(&self.lon) {
            return Err(Error::Range(format!("longitude {} outside [-180, 180)", self.lon)));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::Range(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !(self.diameter_km > 0.0 && self.diameter_km.is_finite()) {
            return Err(Error::Range(format!("diameter {} km is not positive", self.diameter_km)));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Range(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }
}

/// Maps any longitude into `[−180, 180)`.
pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Converts a patch-space detection to geographic coordinates.
pub fn px_to_geo(det: &DetectionPx, g: &GeoRef) -> Result<DetectionGeo> {
    g.validate()?;
    det.bbox.validate()?;
    let (bx, by) = det.bbox.center();
    let (cx, cy) = (det.offset_x + bx, det.offset_y + by);
    let dpp = g.degrees_per_pixel();
    let lat = g.lat_origin - cy * dpp;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::Range(format!("latitude {lat} outside [-90, 90]")));
    }
    Ok(DetectionGeo {
        lon: wrap_lon(g.lon_origin + cx * dpp),
        lat,
        diameter_km: (det.bbox.width() + det.bbox.height()) / 2.0 * g.meters_per_pixel / 1000.0,
        score: det.score,
    })
}

/// Global pixel center of a geographic position; longitude offsets are taken
/// modulo 360° eastward of the origin.
pub fn geo_to_px(lon: f64, lat: f64, g: &GeoRef) -> (f64, f64) {
    let dpp = g.degrees_per_pixel();
    let cx = (lon - g.lon_origin).rem_euclid(360.0) / dpp;
    let cy = (g.lat_origin - lat) / dpp;
    (cx, cy)
}

/// Square global-pixel box whose side equals the diameter in pixels.
pub fn geo_to_box(det: &DetectionGeo, g: &GeoRef) -> Result<BBox> {
    let (cx, cy) = geo_to_px(det.lon, det.lat, g);
    BBox::square(cx, cy, det.diameter_km * 1000.0 / g.meters_per_pixel)
}

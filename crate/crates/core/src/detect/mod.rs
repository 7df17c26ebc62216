//! Detection post-processing: partial-crater removal at patch borders,
//! confidence filtering, non-maximum suppression, pixel ↔ geographic
//! conversion, patch merging and multi-model combination.

mod bbox;
mod geo;
mod io;
mod nms;

use serde::{Deserialize, Serialize};

pub use bbox::{iou, BBox};
pub use geo::{
    geo_to_box, geo_to_px, meters_per_degree, px_to_geo, wrap_lon, DetectionGeo, GeoRef, MOON_RADIUS_M,
};
pub use io::{read_geo_csv, read_px_csv, write_geo_csv, write_px_csv, GEOREF_COMMENT_PREFIX};

use crate::{Error, Result};

/// A box predicted inside one patch, with the patch's offset in the mosaic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionPx {
    pub patch_id: usize,
    pub offset_x: f64,
    pub offset_y: f64,
    pub bbox: BBox,
    pub score: f64,
}

impl DetectionPx {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::arg(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }
}

/// Post-processing thresholds: boundary margin `m` (pixels), score threshold
/// `s` and NMS IoU threshold `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocParams {
    pub m: f64,
    pub s: f64,
    pub tau: f64,
}

impl PostprocParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0) {
            return Err(Error::arg(format!("margin {} must be non-negative", self.m)));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::arg(format!("score threshold {} outside [0, 1]", self.s)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::arg(format!("IoU threshold {} outside (0, 1]", self.tau)));
        }
        Ok(())
    }
}

/// Keeps detections lying inside the closed rectangle `[m, w − m] × [m, h − m]`.
pub fn remove_boundary(dets: &[DetectionPx], m: f64, patch_w: f64, patch_h: f64) -> Vec<DetectionPx> {
    dets.iter()
        .filter(|d| {
            d.bbox.x_min >= m && d.bbox.y_min >= m && d.bbox.x_max <= patch_w - m && d.bbox.y_max <= patch_h - m
        })
        .copied()
        .collect()
}

/// Keeps detections with `score ≥ s`.
pub fn filter_score(dets: &[DetectionPx], s: f64) -> Vec<DetectionPx> {
    dets.iter().filter(|d| d.score >= s).copied().collect()
}

/// Greedy NMS over patch-space boxes translated to mosaic coordinates.
/// Output follows selection order (score descending).
pub fn nms(dets: &[DetectionPx], tau: f64) -> Result<Vec<DetectionPx>> {
    check_tau(tau)?;
    let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox.translate(d.offset_x, d.offset_y)).collect();
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    Ok(nms::nms_indices(&boxes, &scores, tau).into_iter().map(|i| dets[i]).collect())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("IoU threshold {tau} outside (0, 1]")))
    }
}

/// Geographic detections tagged with the georeference they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoDetections {
    pub georef: GeoRef,
    pub detections: Vec<DetectionGeo>,
}

/// NMS in geographic space: each detection becomes a square global-pixel box
/// of side equal to its diameter.
pub fn nms_geo(set: &GeoDetections, tau: f64) -> Result<GeoDetections> {
    check_tau(tau)?;
    let boxes = set
        .detections
        .iter()
        .map(|d| geo_to_box(d, &set.georef))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = set.detections.iter().map(|d| d.score).collect();
    let detections = nms::nms_indices(&boxes, &scores, tau)
        .into_iter()
        .map(|i| set.detections[i])
        .collect();
    Ok(GeoDetections {
        georef: set.georef,
        detections,
    })
}

fn concat_shared(sets: &[GeoDetections]) -> Result<GeoDetections> {
    let first = sets.first().ok_or_else(|| Error::arg("no detection sets given"))?;
    if let Some(other) = sets.iter().find(|s| s.georef != first.georef) {
        return Err(Error::arg(format!(
            "detection sets use different georefs: {:?} vs {:?}",
            first.georef, other.georef
        )));
    }
    Ok(GeoDetections {
        georef: first.georef,
        detections: sets.iter().flat_map(|s| s.detections.iter().copied()).collect(),
    })
}

/// Concatenates per-patch detections and removes overlap duplicates.
pub fn merge_patches(per_patch: &[GeoDetections], tau: f64) -> Result<GeoDetections> {
    if per_patch.is_empty() {
        check_tau(tau)?;
        return Ok(GeoDetections {
            georef: GeoRef::new(0.0, 0.0, 1.0)?,
            detections: Vec::new(),
        });
    }
    nms_geo(&concat_shared(per_patch)?, tau)
}

/// Union of several models' detections followed by cross-model NMS.
/// At `tau_combine = 1` nothing is suppressed.
pub fn combine_models(models: &[GeoDetections], tau_combine: f64) -> Result<GeoDetections> {
    nms_geo(&concat_shared(models)?, tau_combine)
}

/// Patch-level pipeline: boundary removal, score filter, geographic
/// conversion, then merging across patches at `params.tau`.
pub fn run_postprocess(
    dets: &[DetectionPx],
    params: &PostprocParams,
    patch_w: f64,
    patch_h: f64,
    georef: &GeoRef,
) -> Result<GeoDetections> {
    params.validate()?;
    georef.validate()?;
    let kept = filter_score(&remove_boundary(dets, params.m, patch_w, patch_h), params.s);
    let detections = kept.iter().map(|d| px_to_geo(d, georef)).collect::<Result<Vec<_>>>()?;
    nms_geo(
        &GeoDetections {
            georef: *georef,
            detections,
        },
        params.tau,
    )
}

#[cfg(test)]
mod tests;

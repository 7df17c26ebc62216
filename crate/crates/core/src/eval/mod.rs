//! Detection evaluation against a crater catalog: matching, precision /
//! recall / F1, localization IoU, overlapping-crater and rim-completeness
//! breakdowns, and the post-processing grid search.

mod catalog;
mod gridsearch;
mod matching;
mod metrics;
mod overlap;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use catalog::{
    diameter_band_for_scale, filter_band, load_catalog, read_catalog, write_catalog, CatalogEntry, CATALOG_HEADER,
};
pub use gridsearch::{
    evaluate_combination, grid_search, write_grid_csv, GridRow, GridSearchResult, Grids, GRID_CSV_HEADER,
};
pub use matching::{catalog_box, match_detections, MatchReport, TpPair};
pub use metrics::{localization_stats, metrics, LocalizationBin, Metrics};
pub use overlap::{
    arcimg_binned_recall, catalog_circles, circles_overlap, overlapping_indices, overlapping_subset, ArcImgBin,
    CraterCircle, ARC_IMG_BINS,
};

use crate::detect::GeoDetections;
use crate::Result;

/// Default localization bins: 1 km wide over 5–10 km.
pub const DEFAULT_LOCALIZATION_EDGES: [f64; 6] = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// Recall restricted to catalog entries whose rims cross another entry's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub total: usize,
    pub matched: usize,
    /// Percentage; absent when no entry overlaps another.
    pub recall: Option<f64>,
}

/// Everything reported for one detection set against one catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detections: usize,
    pub catalog: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub metrics: Metrics,
    pub localization_overall: LocalizationBin,
    pub localization: Vec<LocalizationBin>,
    pub overlapping: OverlapSummary,
    pub arc_img: Vec<ArcImgBin>,
}

/// Matches `dets` against `catalog` and derives every summary table.
/// Localization bins follow `edges`; the overall entry spans all TPs.
pub fn evaluate(
    dets: &GeoDetections,
    catalog: &[CatalogEntry],
    iou_min: f64,
    edges: &[f64],
) -> Result<(EvalReport, MatchReport)> {
    let report = match_detections(&dets.detections, catalog, &dets.georef, iou_min)?;
    let pairs: Vec<(f64, f64)> = report
        .tp_pairs
        .iter()
        .map(|p| (catalog[p.gt].diameter_km, p.iou))
        .collect();
    let everything = [f64::NEG_INFINITY, f64::INFINITY];
    let localization_overall = localization_stats(&pairs, &everything).remove(0);

    let matched = report.matched_mask(catalog.len());
    let circles = catalog_circles(catalog, dets.georef.body_radius)?;
    let overlap_idx = overlapping_indices(&circles);
    let overlap_hit = overlap_idx.iter().filter(|&&i| matched[i]).count();
    let overlapping = OverlapSummary {
        total: overlap_idx.len(),
        matched: overlap_hit,
        recall: (!overlap_idx.is_empty()).then(|| 100.0 * overlap_hit as f64 / overlap_idx.len() as f64),
    };

    let eval = EvalReport {
        detections: dets.detections.len(),
        catalog: catalog.len(),
        tp: report.tp(),
        fp: report.fp.len(),
        fn_: report.fn_.len(),
        metrics: report.metrics(),
        localization_overall,
        localization: localization_stats(&pairs, edges),
        overlapping,
        arc_img: arcimg_binned_recall(&report, catalog),
    };
    Ok((eval, report))
}

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{match_detections, metrics, CatalogEntry, Metrics};
use crate::detect::{filter_score, nms_geo, px_to_geo, remove_boundary, DetectionPx, GeoDetections, GeoRef};
use crate::{Error, Result};

/// Candidate values for the boundary margin, score threshold and NMS IoU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for Grids {
    /// `m ∈ {0, 5, 10, 15}`, `s ∈ {0, 0.6, 0.7, 0.8, 0.9}`, `tau ∈ {0.1, …, 0.6}`.
    fn default() -> Self {
        Self {
            m: vec![0.0, 5.0, 10.0, 15.0],
            s: vec![0.0, 0.6, 0.7, 0.8, 0.9],
            tau: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

impl Grids {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("m", &self.m), ("s", &self.s), ("tau", &self.tau)] {
            if g.is_empty() {
                return Err(Error::arg(format!("{name} grid is empty")));
            }
        }
        if let Some(m) = self.m.iter().find(|m| !(**m >= 0.0)) {
            return Err(Error::arg(format!("margin {m} must be non-negative")));
        }
        if let Some(s) = self.s.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::arg(format!("score threshold {s} outside [0, 1]")));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::arg(format!("IoU threshold {t} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.m.len() * self.s.len() * self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub m: f64,
    pub s: f64,
    pub tau: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub metrics: Metrics,
}

/// One row per combination, ordered by `m`, then `s`, then `tau` as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub rows: Vec<GridRow>,
    pub best: GridRow,
}

/// True when `a` ranks above `b`: higher F1, then higher precision, then
/// smaller `tau`, `s` and `m`.
fn ranks_above(a: &GridRow, b: &GridRow) -> bool {
    let key = |r: &GridRow| (r.metrics.f1, r.metrics.precision, -r.tau, -r.s, -r.m);
    let (ka, kb) = (key(a), key(b));
    [ka.0.total_cmp(&kb.0), ka.1.total_cmp(&kb.1), ka.2.total_cmp(&kb.2), ka.3.total_cmp(&kb.3), ka.4.total_cmp(&kb.4)]
        .into_iter()
        .find(|o| o.is_ne())
        .is_some_and(|o| o.is_gt())
}

/// Evaluates one post-processing setting end to end.
pub fn evaluate_combination(
    dets: &[DetectionPx],
    patch_w: f64,
    patch_h: f64,
    georef: &GeoRef,
    catalog: &[CatalogEntry],
    (m, s, tau): (f64, f64, f64),
    iou_min: f64,
) -> Result<GridRow> {
    let params = crate::detect::PostprocParams { m, s, tau };
    let merged = crate::detect::run_postprocess(dets, &params, patch_w, patch_h, georef)?;
    let report = match_detections(&merged.detections, catalog, georef, iou_min)?;
    Ok(GridRow {
        m,
        s,
        tau,
        tp: report.tp(),
        fp: report.fp.len(),
        fn_: report.fn_.len(),
        metrics: report.metrics(),
    })
}

/// Exhaustive search over `grids`; the boundary and score filters are shared
/// across the inner loops.
pub fn grid_search(
    dets: &[DetectionPx],
    patch_w: f64,
    patch_h: f64,
    georef: &GeoRef,
    catalog: &[CatalogEntry],
    grids: &Grids,
    iou_min: f64,
) -> Result<GridSearchResult> {
    grids.validate()?;
    georef.validate()?;
    let mut rows = Vec::with_capacity(grids.len());
    for &m in &grids.m {
        let inside = remove_boundary(dets, m, patch_w, patch_h);
        for &s in &grids.s {
            let detections = filter_score(&inside, s)
                .iter()
                .map(|d| px_to_geo(d, georef))
                .collect::<Result<Vec<_>>>()?;
            let set = GeoDetections { georef: *georef, detections };
            for &tau in &grids.tau {
                let merged = nms_geo(&set, tau)?;
                let report = match_detections(&merged.detections, catalog, georef, iou_min)?;
                let (tp, fp, fn_) = (report.tp(), report.fp.len(), report.fn_.len());
                rows.push(GridRow { m, s, tau, tp, fp, fn_, metrics: metrics(tp, fp, fn_) });
            }
        }
    }
    let mut best = rows[0];
    for r in &rows[1..] {
        if ranks_above(r, &best) {
            best = *r;
        }
    }
    Ok(GridSearchResult { rows, best })
}

pub const GRID_CSV_HEADER: [&str; 6] = ["m", "s", "tau", "precision", "recall", "f1"];

pub fn write_grid_csv<W: Write>(mut out: W, result: &GridSearchResult, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.m.to_string(),
            r.s.to_string(),
            r.tau.to_string(),
            format!("{:.2}", r.metrics.precision),
            format!("{:.2}", r.metrics.recall),
            format!("{:.2}", r.metrics.f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

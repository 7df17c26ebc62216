use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CatalogEntry;
use crate::detect::{geo_to_box, iou, BBox, DetectionGeo, GeoRef};
use crate::{Error, Result};

/// A detection matched to a catalog entry, by index into the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpPair {
    pub det: usize,
    pub gt: usize,
    pub iou: f64,
}

/// Outcome of matching detections against a catalog. Every detection index
/// appears exactly once across `tp_pairs` and `fp`; every catalog index
/// exactly once across `tp_pairs` and `fn_`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp_pairs: Vec<TpPair>,
    pub fp: Vec<usize>,
    #[serde(rename = "fn")]
    pub fn_: Vec<usize>,
}

impl MatchReport {
    pub fn tp(&self) -> usize {
        self.tp_pairs.len()
    }

    pub fn metrics(&self) -> super::Metrics {
        super::metrics(self.tp_pairs.len(), self.fp.len(), self.fn_.len())
    }

    /// Per catalog index, whether it was matched.
    pub fn matched_mask(&self, catalog_len: usize) -> Vec<bool> {
        let mut mask = vec![false; catalog_len];
        for p in &self.tp_pairs {
            mask[p.gt] = true;
        }
        mask
    }
}

/// Square box of side equal to the diameter, in the georef's global pixel
/// frame (a uniform scaling of degree space, so IoU is unchanged).
pub fn catalog_box(entry: &CatalogEntry, georef: &GeoRef) -> Result<BBox> {
    geo_to_box(
        &DetectionGeo {
            lon: entry.lon,
            lat: entry.lat,
            diameter_km: entry.diameter_km,
            score: 1.0,
        },
        georef,
    )
}

/// Catalog boxes binned on a grid of median box side; boxes covering more
/// than `MAX_CELLS` cells are kept in a list scanned for every query.
struct GtIndex {
    cell: f64,
    bins: HashMap<(i64, i64), Vec<usize>>,
    large: Vec<usize>,
}

const MAX_CELLS: i64 = 64;

impl GtIndex {
    fn build(boxes: &[BBox]) -> Self {
        let mut sides: Vec<f64> = boxes.iter().map(|b| b.width().max(b.height())).collect();
        let cell = if sides.is_empty() {
            1.0
        } else {
            let mid = sides.len() / 2;
            let (_, m, _) = sides.select_nth_unstable_by(mid, f64::total_cmp);
            m.max(f64::MIN_POSITIVE)
        };
        let mut idx = Self { cell, bins: HashMap::new(), large: Vec::new() };
        for (k, b) in boxes.iter().enumerate() {
            let (x0, y0, x1, y1) = idx.range(b);
            if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > MAX_CELLS {
                idx.large.push(k);
                continue;
            }
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    idx.bins.entry((gx, gy)).or_default().push(k);
                }
            }
        }
        idx
    }

    fn range(&self, b: &BBox) -> (i64, i64, i64, i64) {
        let f = |v: f64| (v / self.cell).floor() as i64;
        (f(b.x_min), f(b.y_min), f(b.x_max), f(b.y_max))
    }

    /// Every binned box sharing a cell with `b`, plus all large boxes;
    /// may contain repeats.
    fn candidates(&self, b: &BBox, all: usize) -> Vec<usize> {
        let (x0, y0, x1, y1) = self.range(b);
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > MAX_CELLS {
            return (0..all).collect();
        }
        let mut out = self.large.clone();
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                if let Some(v) = self.bins.get(&(gx, gy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out
    }
}

/// Greedy one-to-one matching. Detections are visited by descending score
/// (input order on ties); each takes the unmatched catalog entry of highest
/// IoU (lower index on ties) if that IoU is at least `iou_min`.
pub fn match_detections(
    dets: &[DetectionGeo],
    catalog: &[CatalogEntry],
    georef: &GeoRef,
    iou_min: f64,
) -> Result<MatchReport> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(Error::arg(format!("matching IoU threshold {iou_min} outside (0, 1]")));
    }
    georef.validate()?;
    let gt_boxes = catalog.iter().map(|e| catalog_box(e, georef)).collect::<Result<Vec<_>>>()?;
    let det_boxes = dets.iter().map(|d| geo_to_box(d, georef)).collect::<Result<Vec<_>>>()?;
    let index = GtIndex::build(&gt_boxes);

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut taken = vec![false; catalog.len()];
    let mut report = MatchReport::default();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for g in index.candidates(&det_boxes[d], gt_boxes.len()) {
            if taken[g] {
                continue;
            }
            let v = iou(&det_boxes[d], &gt_boxes[g])?;
            let better = match best {
                None => true,
                Some((bg, bv)) => v > bv || (v == bv && g < bg),
            };
            if better {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) if v >= iou_min => {
                taken[g] = true;
                report.tp_pairs.push(TpPair { det: d, gt: g, iou: v });
            }
            _ => report.fp.push(d),
        }
    }
    report.fp.sort_unstable();
    report.fn_ = (0..catalog.len()).filter(|&g| !taken[g]).collect();
    Ok(report)
}

//! Synthetic catalogs and detector output with controlled noise, so the
//! post-processing and evaluation chain can be checked against known truth.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CatalogEntry;
use crate::detect::{geo_to_px, iou, px_to_geo, BBox, DetectionPx, GeoRef};
use crate::raster::patch_offsets;
use crate::{Error, Result};

/// Parameters of a random catalog laid out on a mosaic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSpec {
    pub count: usize,
    pub d_min_km: f64,
    pub d_max_km: f64,
    /// Upper bound on the box IoU between any two craters.
    pub max_pair_iou: f64,
    /// Fraction of entries carrying a rim-completeness value.
    pub arc_img_fraction: f64,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            d_min_km: 5.0,
            d_max_km: 10.0,
            max_pair_iou: 0.1,
            arc_img_fraction: 1.0,
        }
    }
}

/// Mosaic extent and the overlapping tiling the detector ran on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    pub mosaic_w: usize,
    pub mosaic_h: usize,
    pub patch_size: usize,
    pub overlap: f64,
}

/// Confidence ranges for true and false detections, sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreLaw {
    pub tp: (f64, f64),
    pub fp: (f64, f64),
}

impl Default for ScoreLaw {
    fn default() -> Self {
        Self {
            tp: (0.6, 1.0),
            fp: (0.05, 0.7),
        }
    }
}

/// Detector imperfections. Jitter is uniform in `±center_jitter_px` per
/// axis and `±diameter_jitter` relative on the side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub center_jitter_px: f64,
    pub diameter_jitter: f64,
    pub dropout: f64,
    pub false_positives: usize,
    /// Side range of false-positive boxes in pixels.
    pub fp_side_px: (f64, f64),
    pub score: ScoreLaw,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            center_jitter_px: 0.0,
            diameter_jitter: 0.0,
            dropout: 0.0,
            false_positives: 0,
            fp_side_px: (12.5, 25.0),
            score: ScoreLaw::default(),
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi;
        if !(self.center_jitter_px >= 0.0 && (0.0..1.0).contains(&self.diameter_jitter)) {
            return Err(Error::arg("jitter must be non-negative and below 100%"));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::arg(format!("dropout {} outside [0, 1]", self.dropout)));
        }
        if !(self.fp_side_px.0 > 0.0 && self.fp_side_px.0 <= self.fp_side_px.1) {
            return Err(Error::arg("false-positive side range must be positive and ordered"));
        }
        if !ok_range(self.score.tp) || !ok_range(self.score.fp) {
            return Err(Error::arg("score ranges must be ordered subsets of [0, 1]"));
        }
        Ok(())
    }
}

/// Square boxes binned by center; boxes that intersect have centers in
/// adjacent cells when the cell is at least the largest side.
struct BoxGrid {
    cell: f64,
    bins: HashMap<(i64, i64), Vec<BBox>>,
}

impl BoxGrid {
    fn new(cell: f64) -> Self {
        Self { cell: cell.max(f64::MIN_POSITIVE), bins: HashMap::new() }
    }

    fn key(&self, b: &BBox) -> (i64, i64) {
        let (cx, cy) = b.center();
        ((cx / self.cell).floor() as i64, (cy / self.cell).floor() as i64)
    }

    fn insert(&mut self, b: BBox) {
        let k = self.key(&b);
        self.bins.entry(k).or_default().push(b);
    }

    fn neighbors(&self, b: &BBox) -> impl Iterator<Item = &BBox> {
        let (kx, ky) = self.key(b);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (kx + dx, ky + dy)))
            .filter_map(|k| self.bins.get(&k))
            .flatten()
    }
}

fn entry_from_box(id: String, b: &BBox, georef: &GeoRef, arc_img: Option<f64>) -> Result<CatalogEntry> {
    let px = DetectionPx {
        patch_id: 0,
        offset_x: 0.0,
        offset_y: 0.0,
        bbox: *b,
        score: 1.0,
    };
    let g = px_to_geo(&px, georef)?;
    Ok(CatalogEntry {
        id,
        lon: g.lon,
        lat: g.lat,
        diameter_km: g.diameter_km,
        arc_img,
    })
}

/// Random catalog whose craters lie fully inside a `mosaic_w × mosaic_h`
/// mosaic, with diameters uniform in the band.
pub fn synth_catalog<R: Rng + ?Sized>(
    georef: &GeoRef,
    mosaic_w: usize,
    mosaic_h: usize,
    spec: &CatalogSpec,
    rng: &mut R,
) -> Result<Vec<CatalogEntry>> {
    georef.validate()?;
    if !(spec.d_min_km > 0.0 && spec.d_min_km <= spec.d_max_km) {
        return Err(Error::arg("diameter band must be positive and ordered"));
    }
    if !(0.0..=1.0).contains(&spec.max_pair_iou) || !(0.0..=1.0).contains(&spec.arc_img_fraction) {
        return Err(Error::arg("max_pair_iou and arc_img_fraction must lie in [0, 1]"));
    }
    let to_px = 1000.0 / georef.meters_per_pixel;
    let (side_lo, side_hi) = (spec.d_min_km * to_px, spec.d_max_km * to_px);
    let (w, h) = (mosaic_w as f64, mosaic_h as f64);
    if side_hi > w || side_hi > h {
        return Err(Error::arg(format!("craters up to {side_hi:.1} px do not fit a {mosaic_w}x{mosaic_h} mosaic")));
    }
    let mut grid = BoxGrid::new(side_hi);
    let mut out = Vec::with_capacity(spec.count);
    let max_attempts = spec.count.saturating_mul(1000).max(1000);
    let mut attempts = 0;
    while out.len() < spec.count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::arg(format!(
                "could only place {} of {} craters; enlarge the mosaic",
                out.len(),
                spec.count
            )));
        }
        let side = if side_lo < side_hi { rng.gen_range(side_lo..=side_hi) } else { side_lo };
        let cx = rng.gen_range(side / 2.0..=w - side / 2.0);
        let cy = rng.gen_range(side / 2.0..=h - side / 2.0);
        let b = BBox::square(cx, cy, side)?;
        if grid.neighbors(&b).any(|o| iou(o, &b).map_or(true, |v| v > spec.max_pair_iou)) {
            continue;
        }
        let arc = if rng.gen_bool(spec.arc_img_fraction) { Some(rng.gen_range(0.0..=1.0)) } else { None };
        out.push(entry_from_box(format!("C{:06}", out.len()), &b, georef, arc)?);
        grid.insert(b);
    }
    Ok(out)
}

/// Synthetic detector output and the ground truth it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDetections {
    /// Per-patch boxes, grouped by ascending `patch_id`.
    pub detections: Vec<DetectionPx>,
    /// Catalog indices that were dropped.
    pub dropped: Vec<usize>,
    /// Mosaic-space boxes of the false positives.
    pub false_positives: Vec<BBox>,
}

/// Simulates detector output on an overlapping tiling. Each surviving crater
/// is jittered and scored once, then reported in every patch that fully
/// contains its box. False positives avoid every catalog box.
pub fn synth_detections<R: Rng + ?Sized>(
    catalog: &[CatalogEntry],
    georef: &GeoRef,
    tiling: &Tiling,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<SynthDetections> {
    georef.validate()?;
    noise.validate()?;
    let offsets = patch_offsets(tiling.mosaic_h, tiling.mosaic_w, tiling.patch_size, tiling.overlap)?;
    let (w, h) = (tiling.mosaic_w as f64, tiling.mosaic_h as f64);
    let to_px = 1000.0 / georef.meters_per_pixel;

    let mut gt_boxes = Vec::with_capacity(catalog.len());
    for e in catalog {
        e.validate()?;
        let (cx, cy) = geo_to_px(e.lon, e.lat, georef);
        gt_boxes.push(BBox::square(cx, cy, e.diameter_km * to_px)?);
    }

    let mut placed: Vec<(BBox, f64)> = Vec::new();
    let mut dropped = Vec::new();
    let jitter = |rng: &mut R, a: f64| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
    for (k, b) in gt_boxes.iter().enumerate() {
        if noise.dropout > 0.0 && rng.gen_bool(noise.dropout) {
            dropped.push(k);
            continue;
        }
        let (cx, cy) = b.center();
        let jx = jitter(rng, noise.center_jitter_px);
        let jy = jitter(rng, noise.center_jitter_px);
        let js = jitter(rng, noise.diameter_jitter);
        let score = rng.gen_range(noise.score.tp.0..=noise.score.tp.1);
        let side = b.width() * (1.0 + js);
        placed.push((BBox::square(cx + jx, cy + jy, side)?, score));
    }

    let mut false_positives = Vec::with_capacity(noise.false_positives);
    if noise.false_positives > 0 {
        let max_gt = gt_boxes.iter().map(|b| b.width()).fold(0.0, f64::max);
        let (lo, hi) = noise.fp_side_px;
        if hi > w || hi > h {
            return Err(Error::arg("false-positive boxes do not fit the mosaic"));
        }
        let mut grid = BoxGrid::new(max_gt.max(hi));
        for b in &gt_boxes {
            grid.insert(*b);
        }
        let max_attempts = noise.false_positives.saturating_mul(1000);
        let mut attempts = 0;
        while false_positives.len() < noise.false_positives {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::arg("no room for the requested false positives"));
            }
            let side = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
            let cx = rng.gen_range(side / 2.0..=w - side / 2.0);
            let cy = rng.gen_range(side / 2.0..=h - side / 2.0);
            let b = BBox::square(cx, cy, side)?;
            let disjoint = |o: &BBox| b.x_max <= o.x_min || o.x_max <= b.x_min || b.y_max <= o.y_min || o.y_max <= b.y_min;
            if !grid.neighbors(&b).all(disjoint) {
                continue;
            }
            let score = rng.gen_range(noise.score.fp.0..=noise.score.fp.1);
            false_positives.push(b);
            placed.push((b, score));
        }
    }

    let p = tiling.patch_size as f64;
    let mut detections = Vec::new();
    for (patch_id, &(ox, oy)) in offsets.iter().enumerate() {
        let (ox, oy) = (ox as f64, oy as f64);
        for (b, score) in &placed {
            if b.x_min >= ox && b.y_min >= oy && b.x_max <= ox + p && b.y_max <= oy + p {
                detections.push(DetectionPx {
                    patch_id,
                    offset_x: ox,
                    offset_y: oy,
                    bbox: b.translate(-ox, -oy),
                    score: *score,
                });
            }
        }
    }
    Ok(SynthDetections { detections, dropped, false_positives })
}

/// Raw detections and catalog on which the default grids have a single
/// perfect setting, `(m, s, tau) = (5, 0.7, 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFixture {
    pub georef: GeoRef,
    pub patch_size: f64,
    pub detections: Vec<DetectionPx>,
    pub catalog: Vec<CatalogEntry>,
    pub optimum: (f64, f64, f64),
}

/// Builds the planted-optimum fixture. Every unit sits alone in its own
/// 256-pixel patch and uses 60-pixel boxes:
///
/// * 20 interior true craters at score 0.95;
/// * 10 true craters whose box starts 7 px from the patch edge (lost for `m ≥ 10`);
/// * 10 false boxes starting 2 px from the edge (kept only at `m = 0`);
/// * 10 false boxes at score 0.65 and 5 at 0.3 (kept for `s ≤ 0.6`);
/// * 10 true craters at score 0.75 (lost for `s ≥ 0.8`);
/// * 10 true craters with a duplicate at IoU 0.55 (kept as a false positive at `tau = 0.6`);
/// * 10 pairs of distinct craters at IoU 0.45 (one lost for `tau ≤ 0.4`).
pub fn planted_grid_fixture() -> PlantedFixture {
    const PATCH: f64 = 256.0;
    const PITCH: f64 = 300.0;
    const SIDE: f64 = 60.0;
    let georef = GeoRef::new(0.0, 30.0, 100.0).expect("static georef");
    let mid = PATCH / 2.0;
    let dup_dx = SIDE * 0.45 / 1.55;
    let pair_dx = SIDE * 0.55 / 1.45;

    // (box center in patch, is ground truth, detection score or none)
    type Item = ((f64, f64), bool, Option<f64>);
    let mut units: Vec<Vec<Item>> = Vec::new();
    let edge = |x_min: f64| (x_min + SIDE / 2.0, mid);
    units.extend((0..20).map(|_| vec![((mid, mid), true, Some(0.95))]));
    units.extend((0..10).map(|_| vec![(edge(7.0), true, Some(0.95))]));
    units.extend((0..10).map(|_| vec![(edge(2.0), false, Some(0.95))]));
    units.extend((0..10).map(|_| vec![((mid, mid), false, Some(0.65))]));
    units.extend((0..5).map(|_| vec![((mid, mid), false, Some(0.3))]));
    units.extend((0..10).map(|_| vec![((mid, mid), true, Some(0.75))]));
    units.extend((0..10).map(|_| {
        vec![((mid, mid), true, Some(0.95)), ((mid + dup_dx, mid), false, Some(0.9))]
    }));
    units.extend((0..10).map(|_| {
        vec![
            ((mid - pair_dx / 2.0, mid), true, Some(0.95)),
            ((mid + pair_dx / 2.0, mid), true, Some(0.9)),
        ]
    }));

    let mut detections = Vec::new();
    let mut catalog = Vec::new();
    for (patch_id, unit) in units.iter().enumerate() {
        let ox = (patch_id % 10) as f64 * PITCH;
        let oy = (patch_id / 10) as f64 * PITCH;
        for &((cx, cy), is_gt, score) in unit {
            let b = BBox::square(cx, cy, SIDE).expect("static box");
            if is_gt {
                let id = format!("P{:03}", catalog.len());
                let e = entry_from_box(id, &b.translate(ox, oy), &georef, None).expect("inside range");
                catalog.push(e);
            }
            if let Some(score) = score {
                detections.push(DetectionPx { patch_id, offset_x: ox, offset_y: oy, bbox: b, score });
            }
        }
    }
    PlantedFixture {
        georef,
        patch_size: PATCH,
        detections,
        catalog,
        optimum: (5.0, 0.7, 0.5),
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CatalogEntry, MatchReport};
use crate::{Error, Result};

/// Circle in a planar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CraterCircle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl CraterCircle {
    pub fn new(x: f64, y: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(Error::arg(format!("invalid circle ({x}, {y}, r = {r})")));
        }
        Ok(Self { x, y, r })
    }
}

/// True iff the boundaries cross at two points:
/// `(ra − rb)² < d² < (ra + rb)²` with strict inequalities.
pub fn circles_overlap(a: &CraterCircle, b: &CraterCircle) -> bool {
    let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    (a.r - b.r).powi(2) < d2 && d2 < (a.r + b.r).powi(2)
}

/// Catalog entries as circles in kilometres, with degrees scaled by
/// `2πR / 360` on both axes.
pub fn catalog_circles(catalog: &[CatalogEntry], body_radius_m: f64) -> Result<Vec<CraterCircle>> {
    let km_per_deg = 2.0 * std::f64::consts::PI * body_radius_m / 360.0 / 1000.0;
    catalog
        .iter()
        .map(|e| CraterCircle::new(e.lon * km_per_deg, e.lat * km_per_deg, e.diameter_km / 2.0))
        .collect()
}

/// Indices of circles crossing at least one other circle, ascending.
pub fn overlapping_indices(circles: &[CraterCircle]) -> Vec<usize> {
    let rmax = circles.iter().map(|c| c.r).fold(0.0, f64::max);
    if circles.len() < 2 {
        return Vec::new();
    }
    // crossing circles are closer than 2·rmax, so they sit in adjacent cells
    let cell = 2.0 * rmax;
    let key = |c: &CraterCircle| ((c.x / cell).floor() as i64, (c.y / cell).floor() as i64);
    let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, c) in circles.iter().enumerate() {
        bins.entry(key(c)).or_default().push(i);
    }
    let mut hit = vec![false; circles.len()];
    for (i, c) in circles.iter().enumerate() {
        if hit[i] {
            continue;
        }
        let (kx, ky) = key(c);
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bin) = bins.get(&(kx + dx, ky + dy)) else { continue };
                for &j in bin {
                    if j != i && circles_overlap(c, &circles[j]) {
                        hit[i] = true;
                        hit[j] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    (0..circles.len()).filter(|&i| hit[i]).collect()
}

/// Catalog entries whose rim crosses another entry's rim.
pub fn overlapping_subset(catalog: &[CatalogEntry], body_radius_m: f64) -> Result<Vec<CatalogEntry>> {
    let circles = catalog_circles(catalog, body_radius_m)?;
    Ok(overlapping_indices(&circles).into_iter().map(|i| catalog[i].clone()).collect())
}

/// Rim-completeness bins `[0.5, 0.75)`, `[0.75, 0.95)` and `[0.95, 1]`.
pub const ARC_IMG_BINS: [(f64, f64); 3] = [(0.5, 0.75), (0.75, 0.95), (0.95, 1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcImgBin {
    pub lo: f64,
    pub hi: f64,
    pub total: usize,
    pub matched: usize,
    /// Percentage; absent when the bin holds no entries.
    pub recall: Option<f64>,
}

fn arc_bin(a: f64) -> Option<usize> {
    ARC_IMG_BINS
        .iter()
        .position(|&(lo, hi)| a >= lo && (a < hi || (hi == 1.0 && a <= hi)))
}

/// Recall per rim-completeness bin; entries without `arc_img` or below 0.5
/// are excluded. `report` must come from matching against `catalog`.
pub fn arcimg_binned_recall(report: &MatchReport, catalog: &[CatalogEntry]) -> Vec<ArcImgBin> {
    let matched = report.matched_mask(catalog.len());
    let mut counts = [(0usize, 0usize); 3];
    for (e, &m) in catalog.iter().zip(&matched) {
        if let Some(k) = e.arc_img.and_then(arc_bin) {
            counts[k].0 += 1;
            counts[k].1 += m as usize;
        }
    }
    ARC_IMG_BINS
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), (total, matched))| ArcImgBin {
            lo,
            hi,
            total,
            matched,
            recall: (total > 0).then(|| 100.0 * matched as f64 / total as f64),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TpPair;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64, y: f64, r: f64) -> CraterCircle {
        CraterCircle::new(x, y, r).unwrap()
    }

    fn all_pairs(circles: &[CraterCircle]) -> Vec<usize> {
        (0..circles.len())
            .filter(|&i| (0..circles.len()).any(|j| j != i && circles_overlap(&circles[i], &circles[j])))
            .collect()
    }

    #[test]
    fn overlap_examples() {
        assert!(circles_overlap(&c(0.0, 0.0, 2.0), &c(3.0, 0.0, 2.0)));
        assert!(!circles_overlap(&c(0.0, 0.0, 2.0), &c(0.0, 0.0, 2.0)));
        assert!(!circles_overlap(&c(0.0, 0.0, 2.0), &c(10.0, 0.0, 2.0)));
        // tangent from outside and inside
        assert!(!circles_overlap(&c(0.0, 0.0, 2.0), &c(4.0, 0.0, 2.0)));
        assert!(!circles_overlap(&c(0.0, 0.0, 3.0), &c(1.0, 0.0, 2.0)));
        assert!(CraterCircle::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn subsets() {
        assert_eq!(overlapping_indices(&[c(0.0, 0.0, 2.0), c(3.0, 0.0, 2.0)]), vec![0, 1]);
        assert!(overlapping_indices(&[c(0.0, 0.0, 1.0), c(10.0, 0.0, 1.0), c(0.0, 10.0, 1.0)]).is_empty());
        assert!(overlapping_indices(&[]).is_empty());
    }

    #[test]
    fn random_fields_match_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..300 {
            let n = if trial == 0 { 50 } else { rng.gen_range(0..=200) };
            let extent = rng.gen_range(5.0..200.0);
            let circles: Vec<_> = (0..n)
                .map(|_| {
                    let r = if rng.gen_bool(0.03) { rng.gen_range(5.0..30.0) } else { rng.gen_range(0.5..5.0) };
                    c(rng.gen_range(-extent..extent), rng.gen_range(-extent..extent), r)
                })
                .collect();
            assert_eq!(overlapping_indices(&circles), all_pairs(&circles));
        }
    }

    #[test]
    fn catalog_frame() {
        let e = |lon: f64, lat: f64, d: f64| CatalogEntry { id: String::new(), lon, lat, diameter_km: d, arc_img: None };
        // 0.1° ≈ 3.03 km apart with 2 km radii crosses
        let cat = vec![e(0.0, 0.0, 4.0), e(0.1, 0.0, 4.0), e(5.0, 5.0, 4.0)];
        let sub = overlapping_subset(&cat, crate::detect::MOON_RADIUS_M).unwrap();
        assert_eq!(sub, cat[..2].to_vec());
    }

    #[test]
    fn arc_bins() {
        let e = |a: Option<f64>| CatalogEntry { id: String::new(), lon: 0.0, lat: 0.0, diameter_km: 5.0, arc_img: a };
        let cat = vec![e(Some(0.5)), e(Some(0.75)), e(Some(0.95)), e(Some(1.0)), e(Some(0.4)), e(None), e(Some(0.8))];
        let report = MatchReport {
            tp_pairs: vec![TpPair { det: 0, gt: 1, iou: 1.0 }, TpPair { det: 1, gt: 3, iou: 1.0 }],
            fp: vec![],
            fn_: vec![0, 2, 4, 5, 6],
        };
        let bins = arcimg_binned_recall(&report, &cat);
        assert_eq!((bins[0].total, bins[0].recall), (1, Some(0.0)));
        assert_eq!((bins[1].total, bins[1].recall), (2, Some(50.0)));
        assert_eq!((bins[2].total, bins[2].recall), (2, Some(50.0)));
        let empty = arcimg_binned_recall(&MatchReport::default(), &[]);
        assert!(empty.iter().all(|b| b.total == 0 && b.recall.is_none()));
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric(a in (-10.0f64..10.0, -10.0f64..10.0, 0.1f64..5.0), b in (-10.0f64..10.0, -10.0f64..10.0, 0.1f64..5.0)) {
            let (a, b) = (c(a.0, a.1, a.2), c(b.0, b.1, b.2));
            prop_assert_eq!(circles_overlap(&a, &b), circles_overlap(&b, &a));
        }
    }
}

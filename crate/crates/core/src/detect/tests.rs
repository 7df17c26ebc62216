use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn px(x0: f64, y0: f64, x1: f64, y1: f64, score: f64) -> DetectionPx {
    DetectionPx {
        patch_id: 0,
        offset_x: 0.0,
        offset_y: 0.0,
        bbox: BBox::new(x0, y0, x1, y1).unwrap(),
        score,
    }
}

fn random_dets(rng: &mut ChaCha8Rng, n: usize, patch: f64) -> Vec<DetectionPx> {
    (0..n)
        .map(|_| {
            let w = rng.gen_range(2.0..40.0);
            let x = rng.gen_range(-5.0..patch - w + 5.0);
            let y = rng.gen_range(-5.0..patch - w + 5.0);
            px(x, y, x + w, y + w, rng.gen())
        })
        .collect()
}

#[test]
fn boundary_rule_examples() {
    let dets = vec![px(2.0, 50.0, 60.0, 90.0, 0.9), px(5.0, 5.0, 100.0, 100.0, 0.9)];
    assert_eq!(remove_boundary(&dets, 0.0, 256.0, 256.0), dets);
    assert_eq!(remove_boundary(&dets, 5.0, 256.0, 256.0), vec![dets[1]]);
    // far edge is inclusive too
    let edge = vec![px(10.0, 10.0, 251.0, 251.0, 0.5)];
    assert_eq!(remove_boundary(&edge, 5.0, 256.0, 256.0).len(), 1);
    assert!(remove_boundary(&edge, 5.5, 256.0, 256.0).is_empty());
    // margin beyond half the patch leaves nothing
    assert!(remove_boundary(&dets, 129.0, 256.0, 256.0).is_empty());
}

#[test]
fn score_filter_examples() {
    let dets: Vec<_> = [0.65, 0.7, 0.95].iter().map(|&s| px(0.0, 0.0, 1.0, 1.0, s)).collect();
    assert_eq!(filter_score(&dets, 0.0), dets);
    assert_eq!(filter_score(&dets, 0.7).len(), 2);
    let with_one = [dets.clone(), vec![px(0.0, 0.0, 1.0, 1.0, 1.0)]].concat();
    assert_eq!(filter_score(&with_one, 1.0).len(), 1);
}

#[test]
fn nms_hand_trace_and_tau_validation() {
    let a = px(0.0, 0.0, 10.0, 10.0, 0.9);
    let b = px(0.0, 2.5, 10.0, 12.5, 0.8);
    let c = px(50.0, 50.0, 60.0, 60.0, 0.7);
    assert_eq!(nms(&[b, c, a], 0.5).unwrap(), vec![a, c]);
    assert!(nms(&[a], 0.0).is_err());
    assert!(nms(&[a], 1.5).is_err());
}

#[test]
fn nms_uses_mosaic_coordinates() {
    // same local box in two patches 100 px apart does not overlap
    let a = px(0.0, 0.0, 10.0, 10.0, 0.9);
    let b = DetectionPx { offset_x: 100.0, ..a };
    assert_eq!(nms(&[a, b], 0.5).unwrap().len(), 2);
    let c = DetectionPx { offset_x: 1.0, ..a };
    assert_eq!(nms(&[a, c], 0.5).unwrap().len(), 1);
}

fn geo_set(g: GeoRef, dets: &[(f64, f64, f64, f64)]) -> GeoDetections {
    GeoDetections {
        georef: g,
        detections: dets
            .iter()
            .map(|&(lon, lat, diameter_km, score)| DetectionGeo { lon, lat, diameter_km, score })
            .collect(),
    }
}

#[test]
fn merge_keeps_higher_scored_duplicate() {
    let g = GeoRef::new(0.0, 10.0, 100.0).unwrap();
    let a = geo_set(g, &[(1.0, 5.0, 8.0, 0.6)]);
    let b = geo_set(g, &[(1.0 + 1e-7, 5.0, 8.0, 0.8)]);
    let merged = merge_patches(&[a.clone(), b.clone()], 0.5).unwrap();
    assert_eq!(merged.detections, b.detections);
    let far = geo_set(g, &[(3.0, 2.0, 8.0, 0.9)]);
    assert_eq!(merge_patches(&[a.clone(), far.clone()], 0.5).unwrap().detections.len(), 2);
    assert!(merge_patches(&[], 0.5).unwrap().detections.is_empty());
}

#[test]
fn mixed_georefs_are_rejected() {
    let a = geo_set(GeoRef::new(0.0, 0.0, 100.0).unwrap(), &[]);
    let b = geo_set(GeoRef::new(0.0, 0.0, 200.0).unwrap(), &[]);
    assert!(matches!(merge_patches(&[a.clone(), b.clone()], 0.5), Err(Error::Argument(_))));
    assert!(matches!(combine_models(&[a, b], 0.5), Err(Error::Argument(_))));
    assert!(combine_models(&[], 0.5).is_err());
}

#[test]
fn combine_examples() {
    let g = GeoRef::new(0.0, 10.0, 100.0).unwrap();
    let lr = geo_set(g, &[(1.0, 5.0, 8.0, 0.6), (2.0, 5.0, 6.0, 0.9)]);
    let sr = geo_set(g, &[(1.0, 5.0, 8.0, 0.7), (3.0, 4.0, 7.0, 0.5)]);
    assert_eq!(combine_models(&[lr.clone()], 0.5).unwrap(), nms_geo(&lr, 0.5).unwrap());
    let both = combine_models(&[lr.clone(), sr.clone()], 0.5).unwrap();
    assert_eq!(both.detections.len(), 3);
    assert!(both.detections.iter().any(|d| d.score == 0.7));
    assert!(!both.detections.iter().any(|d| d.score == 0.6));
    assert_eq!(combine_models(&[lr, sr], 1.0).unwrap().detections.len(), 4);
}

#[test]
fn pipeline_orders_stages() {
    let g = GeoRef::new(0.0, 0.0, 100.0).unwrap();
    let dets = vec![
        px(1.0, 20.0, 30.0, 50.0, 0.99), // touches the border band
        px(20.0, 20.0, 50.0, 50.0, 0.5), // below the score threshold
        px(60.0, 60.0, 90.0, 90.0, 0.9),
        px(61.0, 60.0, 91.0, 90.0, 0.8), // duplicate of the previous box
    ];
    let params = PostprocParams { m: 5.0, s: 0.7, tau: 0.5 };
    let out = run_postprocess(&dets, &params, 128.0, 128.0, &g).unwrap();
    assert_eq!(out.detections.len(), 1);
    assert_eq!(out.detections[0].score, 0.9);
    assert!(run_postprocess(&dets, &PostprocParams { m: -1.0, ..params }, 128.0, 128.0, &g).is_err());
}

proptest! {
    #[test]
    fn filters_are_nested_monotone(seed in any::<u64>(), m1 in 0.0f64..30.0, dm in 0.0f64..30.0, s1 in 0.0f64..1.0, ds in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dets = random_dets(&mut rng, 60, 128.0);
        let small = remove_boundary(&dets, m1, 128.0, 128.0);
        let large = remove_boundary(&dets, m1 + dm, 128.0, 128.0);
        prop_assert!(large.iter().all(|d| small.contains(d)));
        prop_assert!(small.iter().all(|d| dets.contains(d)));
        let lo = filter_score(&dets, s1);
        let hi = filter_score(&dets, (s1 + ds).min(1.0));
        prop_assert!(hi.iter().all(|d| lo.contains(d)));
    }

    #[test]
    fn union_at_tau_one(seed in any::<u64>(), n1 in 0usize..30, n2 in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GeoRef::new(-10.0, 10.0, 100.0).unwrap();
        let mut make = |n: usize| GeoDetections {
            georef: g,
            detections: (0..n)
                .map(|_| DetectionGeo {
                    lon: rng.gen_range(-10.0..-9.0),
                    lat: rng.gen_range(9.0..10.0),
                    diameter_km: rng.gen_range(1.0..20.0),
                    score: rng.gen(),
                })
                .collect(),
        };
        let (a, b) = (make(n1), make(n2));
        let mut dup = a.clone();
        dup.detections.extend(a.detections.iter().copied());
        let out = combine_models(&[a.clone(), b.clone(), dup.clone()], 1.0).unwrap();
        let key = |d: &DetectionGeo| (d.lon.to_bits(), d.lat.to_bits(), d.diameter_km.to_bits(), d.score.to_bits());
        let mut got: Vec<_> = out.detections.iter().map(key).collect();
        let mut want: Vec<_> = a.detections.iter().chain(&b.detections).chain(&dup.detections).map(key).collect();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }
}

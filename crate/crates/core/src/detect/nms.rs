use std::cmp::Ordering;
use std::collections::HashMap;

use super::bbox::{iou_unchecked, BBox};

/// Boxes spanning more grid cells than this are checked against every
/// candidate instead of being binned.
const MAX_BINNED_CELLS: usize = 64;

/// Candidate order: score descending, then `x_min`, then `y_min` ascending,
/// then input position.
pub(crate) fn selection_order(boxes: &[BBox], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(boxes[a].x_min.total_cmp(&boxes[b].x_min))
            .then(boxes[a].y_min.total_cmp(&boxes[b].y_min))
            .then(a.cmp(&b))
    });
    order
}

/// Kept boxes binned on a uniform grid; two boxes with positive overlap
/// always share at least one cell.
struct KeptIndex {
    cell: f64,
    bins: HashMap<(i64, i64), Vec<usize>>,
    large: Vec<usize>,
}

impl KeptIndex {
    fn new(boxes: &[BBox]) -> Self {
        let mut sides: Vec<f64> = boxes.iter().map(|b| b.width().max(b.height())).collect();
        let cell = if sides.is_empty() {
            1.0
        } else {
            let mid = sides.len() / 2;
            let (_, m, _) = sides.select_nth_unstable_by(mid, f64::total_cmp);
            m.max(f64::MIN_POSITIVE)
        };
        Self {
            cell,
            bins: HashMap::new(),
            large: Vec::new(),
        }
    }

    fn range(&self, b: &BBox) -> (i64, i64, i64, i64) {
        let f = |v: f64| (v / self.cell).floor() as i64;
        (f(b.x_min), f(b.y_min), f(b.x_max), f(b.y_max))
    }

    fn cells(&self, b: &BBox) -> Option<(i64, i64, i64, i64)> {
        let r = self.range(b);
        let n = (r.2 - r.0 + 1).saturating_mul(r.3 - r.1 + 1);
        (n > 0 && n as usize <= MAX_BINNED_CELLS).then_some(r)
    }

    fn insert(&mut self, b: &BBox, id: usize) {
        match self.cells(b) {
            Some((x0, y0, x1, y1)) => {
                for gx in x0..=x1 {
                    for gy in y0..=y1 {
                        self.bins.entry((gx, gy)).or_default().push(id);
                    }
                }
            }
            None => self.large.push(id),
        }
    }

    fn any_overlap(&self, boxes: &[BBox], b: &BBox, tau: f64) -> bool {
        let hit = |&k: &usize| iou_unchecked(&boxes[k], b) > tau;
        if self.large.iter().any(hit) {
            return true;
        }
        let (x0, y0, x1, y1) = self.range(b);
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) as usize > MAX_BINNED_CELLS {
            return self.bins.values().flatten().any(hit);
        }
        (x0..=x1).any(|gx| {
            (y0..=y1).any(|gy| self.bins.get(&(gx, gy)).is_some_and(|v| v.iter().any(hit)))
        })
    }
}

/// Greedy NMS: walk candidates in [`selection_order`] and keep each one whose
/// IoU with every already-kept box is at most `tau`. Returns kept indices in
/// selection order.
pub(crate) fn nms_indices(boxes: &[BBox], scores: &[f64], tau: f64) -> Vec<usize> {
    let mut index = KeptIndex::new(boxes);
    let mut kept = Vec::new();
    for i in selection_order(boxes, scores) {
        if !index.any_overlap(boxes, &boxes[i], tau) {
            index.insert(&boxes[i], i);
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Textbook loop: pick the best remaining box, drop everything that
    /// overlaps it by more than `tau`, repeat.
    fn straight_line_nms(boxes: &[BBox], scores: &[f64], tau: f64) -> Vec<usize> {
        let overlap = |a: &BBox, b: &BBox| {
            let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
            let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
            let inter = iw * ih;
            if inter == 0.0 {
                0.0
            } else {
                (inter / (a.area() + b.area() - inter)).min(1.0)
            }
        };
        let mut remaining: Vec<usize> = (0..boxes.len()).collect();
        let mut kept = Vec::new();
        while !remaining.is_empty() {
            let mut best = 0;
            for k in 1..remaining.len() {
                let (i, j) = (remaining[k], remaining[best]);
                let better = scores[i] > scores[j]
                    || (scores[i] == scores[j]
                        && (boxes[i].x_min < boxes[j].x_min
                            || (boxes[i].x_min == boxes[j].x_min && boxes[i].y_min < boxes[j].y_min)));
                if better {
                    best = k;
                }
            }
            let pick = remaining.remove(best);
            kept.push(pick);
            remaining.retain(|&r| overlap(&boxes[pick], &boxes[r]) <= tau);
        }
        kept
    }

    fn random_instance(rng: &mut impl Rng, n: usize) -> (Vec<BBox>, Vec<f64>) {
        let boxes = (0..n)
            .map(|_| {
                let (x, y) = (rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0));
                let (w, h) = (rng.gen_range(1.0..15.0), rng.gen_range(1.0..15.0));
                BBox::new(x, y, x + w, y + h).unwrap()
            })
            .collect();
        // coarse scores so ties occur
        let scores = (0..n).map(|_| f64::from(rng.gen_range(0..6u8)) / 5.0).collect();
        (boxes, scores)
    }

    #[test]
    fn hand_trace() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        // IoU(a, b) = 0.6 → 60 / 100 with a 10×6 overlap: b shifted 2.5 down
        let b = BBox::new(0.0, 2.5, 10.0, 12.5).unwrap();
        assert!((iou_unchecked(&a, &b) - 0.6).abs() < 1e-12);
        let c = BBox::new(50.0, 50.0, 60.0, 60.0).unwrap();
        let kept = nms_indices(&[a, b, c], &[0.9, 0.8, 0.7], 0.5);
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(nms_indices(&[c], &[0.1], 0.5), vec![0]);
    }

    #[test]
    fn ties_prefer_left_then_top() {
        let boxes = [
            BBox::new(2.0, 0.0, 12.0, 10.0).unwrap(),
            BBox::new(1.0, 5.0, 11.0, 15.0).unwrap(),
            BBox::new(1.0, 0.0, 11.0, 10.0).unwrap(),
        ];
        assert_eq!(selection_order(&boxes, &[0.5; 3]), vec![2, 1, 0]);
    }

    #[test]
    fn matches_straight_line_oracle_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let n = rng.gen_range(0..=20);
            let (boxes, scores) = random_instance(&mut rng, n);
            let tau = [0.1, 0.3, 0.5, 0.7, 1.0][rng.gen_range(0..5)];
            assert_eq!(nms_indices(&boxes, &scores, tau), straight_line_nms(&boxes, &scores, tau));
        }
    }

    #[test]
    fn large_boxes_fall_back_to_full_scan() {
        let mut boxes = vec![BBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap()];
        let mut scores = vec![0.2];
        for k in 0..30 {
            let x = k as f64 * 3.0;
            boxes.push(BBox::new(x, 0.0, x + 2.0, 2.0).unwrap());
            scores.push(0.9);
        }
        boxes.push(BBox::new(0.0, 0.0, 999.0, 999.0).unwrap());
        scores.push(0.1);
        let kept = nms_indices(&boxes, &scores, 0.5);
        assert_eq!(kept, straight_line_nms(&boxes, &scores, 0.5));
        assert!(!kept.contains(&31));
    }

    proptest! {
        #[test]
        fn idempotent_and_pairwise_separated(seed in any::<u64>(), n in 0usize..60, tau in 0.05f64..1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (boxes, scores) = random_instance(&mut rng, n);
            let kept = nms_indices(&boxes, &scores, tau);
            for (x, &i) in kept.iter().enumerate() {
                for &j in &kept[x + 1..] {
                    prop_assert!(iou_unchecked(&boxes[i], &boxes[j]) <= tau);
                }
            }
            let sub_boxes: Vec<BBox> = kept.iter().map(|&i| boxes[i]).collect();
            let sub_scores: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
            let again = nms_indices(&sub_boxes, &sub_scores, tau);
            prop_assert_eq!(again, (0..kept.len()).collect::<Vec<_>>());
        }
    }
}

use serde::{Deserialize, Serialize};

/// Precision, recall and F1 as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// F1 as the harmonic mean of given precision and recall percentages.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision == recall {
            precision
        } else if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Metrics from match counts; every `0/0` ratio is 0.
pub fn metrics(tp: usize, fp: usize, fn_: usize) -> Metrics {
    Metrics::from_pr(pct(tp, tp + fp), pct(tp, tp + fn_))
}

/// IoU statistics for true positives whose ground-truth diameter falls in a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationBin {
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
    /// Mean of `100·IoU`; absent for an empty bin.
    pub mean_iou: Option<f64>,
    /// Population standard deviation of `100·IoU`; absent for an empty bin.
    pub std_iou: Option<f64>,
}

/// Contiguous `[edges[k], edges[k+1])` bins; the last bin is closed.
pub fn localization_stats(pairs: &[(f64, f64)], edges: &[f64]) -> Vec<LocalizationBin> {
    let nb = edges.len().saturating_sub(1);
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for &(diameter, iou) in pairs {
        let slot = (0..nb).find(|&k| {
            diameter >= edges[k] && (diameter < edges[k + 1] || (k + 1 == nb && diameter == edges[k + 1]))
        });
        if let Some(k) = slot {
            groups[k].push(100.0 * iou);
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let n = v.len();
            let (mean, std) = if n == 0 {
                (None, None)
            } else {
                let m = v.iter().sum::<f64>() / n as f64;
                let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
                (Some(m), Some(var.sqrt()))
            };
            LocalizationBin {
                d_min: edges[k],
                d_max: edges[k + 1],
                count: n,
                mean_iou: mean,
                std_iou: std,
            }
        })
        .collect()
}

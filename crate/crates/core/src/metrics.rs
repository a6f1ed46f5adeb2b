//! Segmentation metrics (Jaccard, mIoU) and localization recall/precision/F1.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::anchors::{iou, Segment};
use crate::decoder::Scored;

/// Intersection over prediction `|g ∩ p| / |p|`.
pub fn intersection_over_prediction(gt: &Segment, pred: &Segment) -> f64 {
    gt.intersection(pred) as f64 / pred.length() as f64
}

fn mean_best(preds: &[Segment], gts: &[Segment], overlap: impl Fn(&Segment, &Segment) -> f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let total: f64 = gts
        .iter()
        .map(|g| preds.iter().map(|p| overlap(g, p)).fold(0.0, f64::max))
        .sum();
    Some(total / gts.len() as f64)
}

/// Mean over ground truths of the best intersection-over-prediction.
/// `None` when there is no ground truth.
pub fn jaccard_score(preds: &[Segment], gts: &[Segment]) -> Option<f64> {
    mean_best(preds, gts, intersection_over_prediction)
}

/// Mean over ground truths of the best IoU.
pub fn miou_score(preds: &[Segment], gts: &[Segment]) -> Option<f64> {
    mean_best(preds, gts, iou)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Greedy one-to-one matching in descending score order: a prediction is a
/// true positive when some still-unmatched ground truth has IoU at least
/// `tiou` with it (the best such ground truth is consumed).
pub fn prf_at_iou(preds: &[Scored], gts: &[Segment], tiou: f64) -> Prf {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap_or(Ordering::Equal));
    let mut matched = vec![false; gts.len()];
    let mut tp = 0usize;
    for i in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] {
                continue;
            }
            let v = iou(&preds[i].segment, gt);
            if v >= tiou && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            matched[g] = true;
            tp += 1;
        }
    }
    let recall = if gts.is_empty() { 0.0 } else { tp as f64 / gts.len() as f64 };
    let precision = if preds.is_empty() { 0.0 } else { tp as f64 / preds.len() as f64 };
    let f1 = if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    };
    Prf { recall, precision, f1 }
}

/// Per-video metrics, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEval {
    pub id: String,
    pub num_predictions: usize,
    pub jaccard: f64,
    pub miou: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl VideoEval {
    /// `None` if the video has no ground truth.
    pub fn compute(id: &str, preds: &[Segment], gts: &[Segment], prf_preds: &[Scored], tiou: f64) -> Option<Self> {
        let jaccard = jaccard_score(preds, gts)?;
        let miou = miou_score(preds, gts)?;
        let prf = prf_at_iou(prf_preds, gts, tiou);
        Some(Self {
            id: id.to_string(),
            num_predictions: preds.len(),
            jaccard: 100.0 * jaccard,
            miou: 100.0 * miou,
            recall: 100.0 * prf.recall,
            precision: 100.0 * prf.precision,
            f1: 100.0 * prf.f1,
        })
    }
}

/// Corpus metrics (per-video averages, percent) with the per-video rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub split: String,
    pub ablation: String,
    pub num_videos: usize,
    pub mean_predictions: f64,
    pub jaccard: f64,
    pub miou: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub per_video: Vec<VideoEval>,
}

impl EvalReport {
    /// Aggregates per-video rows; rows are sorted by id first.
    pub fn from_videos(method: &str, split: &str, ablation: &str, mut per_video: Vec<VideoEval>) -> Self {
        per_video.sort_by(|a, b| a.id.cmp(&b.id));
        let n = per_video.len();
        let avg = |f: fn(&VideoEval) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_video.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            method: method.into(),
            split: split.into(),
            ablation: ablation.into(),
            num_videos: n,
            mean_predictions: avg(|v| v.num_predictions as f64),
            jaccard: avg(|v| v.jaccard),
            miou: avg(|v| v.miou),
            recall: avg(|v| v.recall),
            precision: avg(|v| v.precision),
            f1: avg(|v| v.f1),
            per_video,
        }
    }
}

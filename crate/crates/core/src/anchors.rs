//! Temporal anchors, the center/log-length offset codec, 1-D IoU, and
//! positive/negative sample assignment for the proposal head.
//!
//! Frame `t` occupies the continuous interval `[t, t+1)`, so an anchor placed
//! at frame `t` has center `t + 0.5`. For odd lengths its extent
//! `[t - (l-1)/2, t + (l+1)/2)` is then exactly integral.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::Config(format!("empty segment [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn center(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0
    }

    pub fn length(&self) -> usize {
        self.end - self.start
    }

    pub fn intersection(&self, other: &Segment) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn union(&self, other: &Segment) -> usize {
        self.length() + other.length() - self.intersection(other)
    }

    pub fn fits(&self, frames: usize) -> bool {
        self.start < self.end && self.end <= frames
    }
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Intersection over union of two segments, in `[0, 1]`.
pub fn iou(a: &Segment, b: &Segment) -> f64 {
    let inter = a.intersection(b);
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / a.union(b) as f64
}

/// IoU of raw (possibly out-of-video) integer intervals.
fn interval_iou(a: (i64, i64), b: (i64, i64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0);
    if inter == 0 {
        return 0.0;
    }
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    inter as f64 / union as f64
}

/// A fixed-length reference interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub center: f64,
    pub length: usize,
}

impl Anchor {
    pub fn new(center: f64, length: usize) -> Self {
        Self { center, length }
    }

    /// The anchor of the given length centered on frame `frame`.
    pub fn at_frame(frame: usize, length: usize) -> Self {
        Self {
            center: frame as f64 + 0.5,
            length,
        }
    }

    /// Unclipped integer extent of an anchor placed on a frame.
    pub fn raw_extent(frame: usize, length: usize) -> (i64, i64) {
        let t = frame as i64;
        let l = length as i64;
        (t - (l - 1) / 2, t + (l + 1) / 2)
    }
}

/// Center shift relative to anchor length, and log length ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OffsetPair<T> {
    pub theta_c: T,
    pub theta_l: T,
}

impl<T: Scalar> OffsetPair<T> {
    pub fn zero() -> Self {
        Self {
            theta_c: T::zero(),
            theta_l: T::zero(),
        }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.theta_c, self.theta_l]
    }

    /// Whether both components lie strictly inside the tanh range.
    pub fn representable(&self) -> bool {
        self.theta_c.abs() < T::one() && self.theta_l.abs() < T::one()
    }
}

/// `l_k = min_len + k * interval` for `k = 0..count`.
pub fn build_anchor_lengths(min_len: usize, interval: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::Config("anchor count must be at least 1".into()));
    }
    let lengths: Vec<usize> = (0..count).map(|k| min_len + k * interval).collect();
    if let Some(bad) = lengths.iter().find(|&&l| l % 2 == 0) {
        return Err(Error::Config(format!(
            "anchor length {bad} is even (min_len {min_len}, interval {interval})"
        )));
    }
    Ok(lengths)
}

/// Regression target taking `anchor` onto `gt`.
pub fn encode_offsets<T: Scalar>(anchor: &Anchor, gt: &Segment) -> OffsetPair<T> {
    let la = anchor.length as f64;
    OffsetPair {
        theta_c: T::of((gt.center() - anchor.center) / la),
        theta_l: T::of((gt.length() as f64 / la).ln()),
    }
}

/// Continuous `(center, length)` after applying offsets.
pub fn decode_continuous<T: Scalar>(anchor: &Anchor, offsets: &OffsetPair<T>) -> (f64, f64) {
    let la = anchor.length as f64;
    let center = anchor.center + offsets.theta_c.as_f64() * la;
    let length = la * offsets.theta_l.as_f64().exp();
    (center, length)
}

/// Applies offsets, rounds to frames and clips into `[0, frames)` keeping at
/// least one frame.
pub fn decode_segment<T: Scalar>(anchor: &Anchor, offsets: &OffsetPair<T>, frames: usize) -> Segment {
    let (c, l) = decode_continuous(anchor, offsets);
    let round = |x: f64| (x + 0.5).floor();
    let lo = round(c - l / 2.0);
    let hi = round(c + l / 2.0);
    let max_start = frames.saturating_sub(1) as f64;
    let start = if lo.is_nan() { 0.0 } else { lo.clamp(0.0, max_start) } as usize;
    let end = if hi.is_nan() { 0.0 } else { hi.clamp(0.0, frames as f64) } as usize;
    Segment {
        start,
        end: end.max(start + 1),
    }
}

/// Anchor lengths crossed with every frame of a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorGrid {
    pub lengths: Vec<usize>,
    pub frames: usize,
}

impl AnchorGrid {
    pub fn new(lengths: Vec<usize>, frames: usize) -> Self {
        Self { lengths, frames }
    }

    pub fn num_lengths(&self) -> usize {
        self.lengths.len()
    }

    pub fn anchor(&self, k: usize, t: usize) -> Anchor {
        Anchor::at_frame(t, self.lengths[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentConfig {
    pub pos_iou: f64,
    pub neg_iou: f64,
    /// Samples drawn per class (`U`).
    pub samples: usize,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self {
            pos_iou: 0.8,
            neg_iou: 0.2,
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Positive<T> {
    pub k: usize,
    pub t: usize,
    /// Index of the matched ground-truth segment.
    pub gt: usize,
    pub target: OffsetPair<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AssignmentBatch<T> {
    pub positives: Vec<Positive<T>>,
    pub negatives: Vec<(usize, usize)>,
}

impl<T: Scalar> AssignmentBatch<T> {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labels every anchor placement against `gts` and samples a training batch.
///
/// A placement is positive when its raw extent has IoU at least `pos_iou`
/// with some ground truth (paired with the highest-IoU one, earlier start
/// winning ties), negative when IoU is below `neg_iou` with all of them.
/// Up to `samples` positives are drawn, and negatives fill the batch to
/// `2 * samples`.
pub fn assign_training_samples<T: Scalar, R: Rng + ?Sized>(
    grid: &AnchorGrid,
    gts: &[Segment],
    cfg: &AssignmentConfig,
    rng: &mut R,
) -> Result<AssignmentBatch<T>> {
    if cfg.pos_iou.is_nan() || cfg.neg_iou.is_nan() || cfg.pos_iou <= cfg.neg_iou {
        return Err(Error::Config(format!(
            "positive IoU threshold {} must exceed negative threshold {}",
            cfg.pos_iou, cfg.neg_iou
        )));
    }
    let mut order: Vec<usize> = (0..gts.len()).collect();
    order.sort_by_key(|&i| (gts[i].start, gts[i].end, i));

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (k, &len) in grid.lengths.iter().enumerate() {
        for t in 0..grid.frames {
            let extent = Anchor::raw_extent(t, len);
            let mut best: Option<(usize, f64)> = None;
            for &g in &order {
                let gt = &gts[g];
                let v = interval_iou(extent, (gt.start as i64, gt.end as i64));
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= cfg.pos_iou => positives.push(Positive {
                    k,
                    t,
                    gt: g,
                    target: encode_offsets(&grid.anchor(k, t), &gts[g]),
                }),
                Some((_, v)) if v < cfg.neg_iou => negatives.push((k, t)),
                None => negatives.push((k, t)),
                _ => {}
            }
        }
    }
    if negatives.is_empty() {
        return Err(Error::Assignment(
            "no negative anchor placements available".into(),
        ));
    }

    let n_pos = positives.len().min(cfg.samples);
    let mut pos_idx = sample(rng, positives.len(), n_pos).into_vec();
    pos_idx.sort_unstable();
    let n_neg = (2 * cfg.samples - n_pos).min(negatives.len());
    let mut neg_idx = sample(rng, negatives.len(), n_neg).into_vec();
    neg_idx.sort_unstable();

    Ok(AssignmentBatch {
        positives: pos_idx.into_iter().map(|i| positives[i].clone()).collect(),
        negatives: neg_idx.into_iter().map(|i| negatives[i]).collect(),
    })
}

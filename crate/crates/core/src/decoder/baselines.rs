use std::cmp::Ordering;

use crate::anchors::{decode_segment, iou, AnchorGrid, Segment};
use crate::error::{Error, Result};
use crate::proposal::ProposalMap;
use crate::scalar::Scalar;

/// A segment with a ranking score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub segment: Segment,
    pub score: f64,
}

/// Every (anchor, frame) proposal of the map, decoded, in `(k, t)` order.
pub fn map_proposals<T: Scalar>(map: &ProposalMap<T>, anchors: &AnchorGrid) -> Vec<Scored> {
    let (k_total, frames) = map.scores.shape();
    let mut out = Vec::with_capacity(k_total * frames);
    for k in 0..k_total {
        for t in 0..frames {
            out.push(Scored {
                segment: decode_segment(&anchors.anchor(k, t), &map.offsets(k, t), frames),
                score: map.scores.get(k, t).as_f64(),
            });
        }
    }
    out
}

/// Sorts by descending score, stable for equal scores.
pub fn rank_by_score(items: &mut [Scored]) {
    items.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
}

/// Greedy non-maximum suppression: keep a candidate (best score first) if
/// its IoU with every kept one is below `iou_thresh`; stop after `n`. The
/// result is ordered by start frame. Fewer than `n` survivors are returned
/// as is.
pub fn nms_select(candidates: &[Scored], iou_thresh: f64, n: usize) -> Vec<Scored> {
    let mut ranked = candidates.to_vec();
    rank_by_score(&mut ranked);
    let mut kept: Vec<Scored> = Vec::with_capacity(n);
    for c in ranked {
        if kept.len() >= n {
            break;
        }
        if kept.iter().all(|k| iou(&k.segment, &c.segment) < iou_thresh) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|s| (s.segment.start, s.segment.end));
    kept
}

/// `n` contiguous segments tiling `[0, frames)`; the last absorbs the
/// remainder.
pub fn uniform_segments(frames: usize, n: usize) -> Result<Vec<Segment>> {
    if n == 0 || n > frames {
        return Err(Error::Config(format!(
            "cannot split {frames} frames into {n} uniform segments"
        )));
    }
    let size = frames / n;
    Ok((0..n)
        .map(|i| Segment {
            start: i * size,
            end: if i + 1 == n { frames } else { (i + 1) * size },
        })
        .collect())
}

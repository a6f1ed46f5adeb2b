use serde::{Deserialize, Serialize};

use crate::anchors::{decode_segment, iou, AnchorGrid, Segment};
use crate::error::{Error, Result};
use crate::proposal::ProposalMap;
use crate::scalar::Scalar;

/// The winner of one max-pooling window of the score map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Candidate<T> {
    pub k: usize,
    pub t: usize,
    pub score: T,
    pub segment: Segment,
}

/// Non-overlapping `h x w` max-pooling of the score map, flattened column by
/// column: window (row `r`, column `c`) has flat index `c * rows + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CandidateGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Candidate<T>>,
}

impl<T: Scalar> CandidateGrid<T> {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn flat_index(&self, row: usize, col: usize) -> usize {
        col * self.rows + row
    }

    /// The proposal vector `S`.
    pub fn proposal_vector(&self) -> Vec<T> {
        self.cells.iter().map(|c| c.score).collect()
    }

    pub fn segment(&self, m: usize) -> Segment {
        self.cells[m].segment
    }
}

/// Number of candidates `ceil(K/h) * ceil(L/w)`.
pub fn grid_size(num_lengths: usize, frames: usize, pool_h: usize, pool_w: usize) -> usize {
    num_lengths.div_ceil(pool_h) * frames.div_ceil(pool_w)
}

/// Max-pools the score map; each window's winner is decoded with its own
/// offsets. Ties go to the smaller anchor index, then the earlier frame.
pub fn build_candidate_grid<T: Scalar>(
    map: &ProposalMap<T>,
    pool_h: usize,
    pool_w: usize,
    anchors: &AnchorGrid,
) -> Result<CandidateGrid<T>> {
    if pool_h == 0 || pool_w == 0 {
        return Err(Error::Config(format!("pooling window {pool_h}x{pool_w} is empty")));
    }
    let (k_total, frames) = map.scores.shape();
    if k_total != anchors.num_lengths() || frames != anchors.frames {
        return Err(Error::dimension(
            format!("{}x{} score map", anchors.num_lengths(), anchors.frames),
            map.scores.shape_str(),
        ));
    }
    let rows = k_total.div_ceil(pool_h);
    let cols = frames.div_ceil(pool_w);
    let mut cells = Vec::with_capacity(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            let mut best: Option<(usize, usize, T)> = None;
            for k in r * pool_h..((r + 1) * pool_h).min(k_total) {
                for t in c * pool_w..((c + 1) * pool_w).min(frames) {
                    let s = map.scores.get(k, t);
                    if best.is_none_or(|(_, _, b)| s > b) {
                        best = Some((k, t, s));
                    }
                }
            }
            let (k, t, score) = best.expect("pooling windows are non-empty");
            let segment = decode_segment(&anchors.anchor(k, t), &map.offsets(k, t), frames);
            cells.push(Candidate { k, t, score, segment });
        }
    }
    Ok(CandidateGrid { rows, cols, cells })
}

/// Index of the candidate that best matches `gt`: highest IoU, or nearest
/// center when nothing overlaps. Ties go to the smaller index.
pub fn nearest_candidate<T: Scalar>(gt: &Segment, grid: &CandidateGrid<T>) -> usize {
    let mut best = (0usize, -1.0f64);
    for (m, cand) in grid.cells.iter().enumerate() {
        let v = iou(&cand.segment, gt);
        if v > best.1 {
            best = (m, v);
        }
    }
    if best.1 > 0.0 {
        return best.0;
    }
    let mut nearest = (0usize, f64::INFINITY);
    for (m, cand) in grid.cells.iter().enumerate() {
        let d = (cand.segment.center() - gt.center()).abs();
        if d < nearest.1 {
            nearest = (m, d);
        }
    }
    nearest.0
}

/// Routes `dL/dS` back onto the winning score-map entries.
pub fn pool_backward<T: Scalar>(grid: &CandidateGrid<T>, dvec: &[T], dscores: &mut crate::numerics::Array2<T>) {
    for (cand, &g) in grid.cells.iter().zip(dvec) {
        dscores.add_at(cand.k, cand.t, g);
    }
}

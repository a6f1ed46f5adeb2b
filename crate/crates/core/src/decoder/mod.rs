//! Segment-level sequential prediction over pooled proposal candidates, plus
//! the NMS and uniform selection baselines.

mod baselines;
mod grid;
mod sequence;

pub use baselines::{map_proposals, nms_select, rank_by_score, uniform_segments, Scored};
pub use grid::{build_candidate_grid, grid_size, nearest_candidate, pool_backward, Candidate, CandidateGrid};
pub use sequence::{mean_pool, Ablation, DecoderInput, Emission, SequenceDecoder, TeacherForced, Token};

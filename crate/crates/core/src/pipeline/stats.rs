use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Split};

/// Relative-duration histogram bins: `[0, 5%)`, `[5%, 10%)`, ... `[45%, 50%)`, `>= 50%`.
pub const DURATION_BINS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub num_videos: usize,
    pub num_segments: usize,
    pub mean_segments_per_video: f64,
    /// Segment count -> number of videos.
    pub segments_per_video: BTreeMap<usize, usize>,
    pub mean_segment_frames: f64,
    /// Segment length as a fraction of its video, in 5% bins.
    pub relative_duration_histogram: Vec<usize>,
    /// Mean fraction of frames inside some segment.
    pub mean_coverage: f64,
}

pub fn dataset_stats(data: &Dataset) -> Vec<SplitStats> {
    [Split::Train, Split::Val, Split::Test]
        .into_iter()
        .filter_map(|split| {
            let videos = data.split(split);
            if videos.is_empty() {
                return None;
            }
            let mut counts = BTreeMap::new();
            let mut hist = vec![0; DURATION_BINS];
            let mut total_len = 0usize;
            let mut num_segments = 0usize;
            let mut coverage = 0.0;
            for s in &videos {
                let v = &s.video;
                *counts.entry(v.segments.len()).or_insert(0) += 1;
                let mut covered = vec![false; v.num_frames];
                for seg in &v.segments {
                    num_segments += 1;
                    total_len += seg.length();
                    let rel = seg.length() as f64 / v.num_frames as f64;
                    hist[((rel * 20.0) as usize).min(DURATION_BINS - 1)] += 1;
                    covered[seg.start..seg.end].fill(true);
                }
                coverage += covered.iter().filter(|&&c| c).count() as f64 / v.num_frames as f64;
            }
            let n = videos.len() as f64;
            Some(SplitStats {
                split,
                num_videos: videos.len(),
                num_segments,
                mean_segments_per_video: num_segments as f64 / n,
                segments_per_video: counts,
                mean_segment_frames: if num_segments == 0 {
                    0.0
                } else {
                    total_len as f64 / num_segments as f64
                },
                relative_duration_histogram: hist,
                mean_coverage: coverage / n,
            })
        })
        .collect()
}

use log::warn;

use super::Sample;
use crate::anchors::Segment;
use crate::encoder::VideoFeatures;
use crate::error::Result;
use crate::numerics::Array2;

/// Swaps the two halves of a video: frames `[L/2, L)` move to the front.
/// Segments straddling `L/2` are dropped with a warning. An involution for
/// even `L`.
pub fn permute_halves(sample: &Sample) -> Result<Sample> {
    let x = sample.features.matrix();
    let (frames, dim) = x.shape();
    let half = frames / 2;
    let tail = frames - half;
    let permuted = Array2::from_fn(frames, dim, |t, d| x.get((t + half) % frames, d));

    let mut segments = Vec::with_capacity(sample.video.segments.len());
    for seg in &sample.video.segments {
        if seg.end <= half {
            segments.push(Segment {
                start: seg.start + tail,
                end: seg.end + tail,
            });
        } else if seg.start >= half {
            segments.push(Segment {
                start: seg.start - half,
                end: seg.end - half,
            });
        } else {
            warn!("video {}: segment {seg:?} straddles the midpoint, dropped", sample.video.id);
        }
    }
    segments.sort();
    let mut video = sample.video.clone();
    video.segments = segments;
    Ok(Sample {
        video,
        features: VideoFeatures::new(permuted)?,
    })
}

//! Reading and writing videos, plus the synthetic corpus and its transforms.

mod annotations;
mod features;
mod synth;
mod transforms;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use annotations::{load_annotations, parse_annotations, save_annotations, seconds_to_frame, AnnotatedVideo, Split};
pub use features::{decode_features, encode_features, load_features, save_features, HEADER_LEN, MAGIC};
pub use synth::{shift_offset, synth_generate, SynthConfig, SynthCorpus, SynthVideo};
pub use transforms::permute_halves;

use crate::encoder::VideoFeatures;
use crate::error::{Error, Result};

pub const ANNOTATION_FILE: &str = "annotations.json";
pub const FEATURE_DIR: &str = "features";

/// A video's annotation together with its frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub video: AnnotatedVideo,
    pub features: VideoFeatures<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.video.split == split).collect()
    }

    /// Writes `annotations.json` and `features/<id>.psf`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let feat_dir = dir.join(FEATURE_DIR);
        fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
        let videos: Vec<AnnotatedVideo> = self.samples.iter().map(|s| s.video.clone()).collect();
        save_annotations(&videos, &dir.join(ANNOTATION_FILE))?;
        for s in &self.samples {
            save_features(&s.features, &feat_dir.join(format!("{}.psf", s.video.id)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let videos = load_annotations(&dir.join(ANNOTATION_FILE))?;
        let mut samples = Vec::with_capacity(videos.len());
        for video in videos {
            let path = dir.join(FEATURE_DIR).join(format!("{}.psf", video.id));
            let features = load_features::<f64>(&path)?;
            if features.frames() != video.num_frames {
                return Err(Error::Config(format!(
                    "video {}: annotation says {} frames, feature file has {}",
                    video.id,
                    video.num_frames,
                    features.frames()
                )));
            }
            samples.push(Sample { video, features });
        }
        Ok(Self { samples })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedSegment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPredictions {
    pub id: String,
    pub segments: Vec<PredictedSegment>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionFile {
    pub videos: Vec<VideoPredictions>,
}

impl PredictionFile {
    pub fn by_id(&self) -> BTreeMap<&str, &VideoPredictions> {
        self.videos.iter().map(|v| (v.id.as_str(), v)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

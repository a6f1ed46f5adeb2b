use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::anchors::Segment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("unknown split {other:?} (train|val|test)"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A video's ground-truth procedure segments, in frames, sorted by start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedVideo {
    pub id: String,
    pub num_frames: usize,
    pub segments: Vec<Segment>,
    pub split: Split,
}

/// Seconds to frame index: `round(t * num_frames / duration)`.
pub fn seconds_to_frame(t: f64, num_frames: usize, duration: f64) -> i64 {
    (t * num_frames as f64 / duration).round() as i64
}

fn field<'a>(v: &'a Value, id: &str, name: &str) -> Result<&'a Value> {
    v.get(name).ok_or_else(|| Error::Parse {
        video: id.to_string(),
        field: name.to_string(),
        message: "missing".into(),
    })
}

fn number(v: &Value, id: &str, name: &str, label: &str) -> Result<f64> {
    let x = v.get(name).ok_or_else(|| Error::Parse {
        video: id.to_string(),
        field: label.to_string(),
        message: "missing".into(),
    })?;
    x.as_f64().ok_or_else(|| Error::Parse {
        video: id.to_string(),
        field: label.to_string(),
        message: "expected a number".into(),
    })
}

/// Parses an annotation document; see [`load_annotations`].
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotatedVideo>> {
    let doc: Value = serde_json::from_str(text)?;
    let entries = doc.get("videos").and_then(Value::as_array).ok_or_else(|| Error::Parse {
        video: String::new(),
        field: "videos".into(),
        message: "expected an array".into(),
    })?;
    let mut out = Vec::with_capacity(entries.len());
    for (i, v) in entries.iter().enumerate() {
        let id = field(v, &format!("#{i}"), "id")?
            .as_str()
            .ok_or_else(|| Error::Parse {
                video: format!("#{i}"),
                field: "id".into(),
                message: "expected a string".into(),
            })?
            .to_string();
        let duration = number(v, &id, "duration", "duration")?;
        if duration.is_nan() || duration <= 0.0 {
            return Err(Error::Parse {
                video: id,
                field: "duration".into(),
                message: format!("must be positive, got {duration}"),
            });
        }
        let num_frames = field(v, &id, "num_frames")?
            .as_u64()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Parse {
                video: id.clone(),
                field: "num_frames".into(),
                message: "expected a positive integer".into(),
            })? as usize;
        let split: Split = field(v, &id, "split")?
            .as_str()
            .ok_or_else(|| Error::Parse {
                video: id.clone(),
                field: "split".into(),
                message: "expected a string".into(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                video: id.clone(),
                field: "split".into(),
                message: "expected train, val or test".into(),
            })?;
        let raw = field(v, &id, "segments")?.as_array().ok_or_else(|| Error::Parse {
            video: id.clone(),
            field: "segments".into(),
            message: "expected an array".into(),
        })?;

        let mut segments = Vec::with_capacity(raw.len());
        for (j, s) in raw.iter().enumerate() {
            let start = number(s, &id, "start", &format!("segments[{j}].start"))?;
            let end = number(s, &id, "end", &format!("segments[{j}].end"))?;
            let mut fs = seconds_to_frame(start, num_frames, duration);
            let mut fe = seconds_to_frame(end, num_frames, duration);
            if fs < 0 {
                warn!("video {id}: segment {j} starts before 0, clipped");
                fs = 0;
            }
            if fe > num_frames as i64 {
                warn!("video {id}: segment {j} ends past the video, clipped to {num_frames}");
                fe = num_frames as i64;
            }
            if fe <= fs {
                warn!("video {id}: segment {j} is empty after rounding, dropped");
                continue;
            }
            segments.push(Segment {
                start: fs as usize,
                end: fe as usize,
            });
        }
        if segments.is_empty() {
            warn!("video {id}: no usable segments, skipped");
            continue;
        }
        segments.sort();
        if segments.windows(2).any(|w| w[0].end > w[1].start) {
            warn!("video {id}: overlapping segments");
        }
        out.push(AnnotatedVideo {
            id,
            num_frames,
            segments,
            split,
        });
    }
    Ok(out)
}

/// Reads a JSON annotation file with times in seconds.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedVideo>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text)
}

#[derive(Serialize)]
struct FileSegment {
    start: f64,
    end: f64,
}

#[derive(Serialize)]
struct FileVideo<'a> {
    id: &'a str,
    duration: f64,
    num_frames: usize,
    split: Split,
    segments: Vec<FileSegment>,
}

#[derive(Serialize)]
struct FileDoc<'a> {
    videos: Vec<FileVideo<'a>>,
}

/// Writes annotations at one frame per second, so times equal frame indices.
pub fn save_annotations(videos: &[AnnotatedVideo], path: &Path) -> Result<()> {
    let doc = FileDoc {
        videos: videos
            .iter()
            .map(|v| FileVideo {
                id: &v.id,
                duration: v.num_frames as f64,
                num_frames: v.num_frames,
                split: v.split,
                segments: v
                    .segments
                    .iter()
                    .map(|s| FileSegment {
                        start: s.start as f64,
                        end: s.end as f64,
                    })
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

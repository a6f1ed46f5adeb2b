//! Synthetic instructional videos.
//!
//! Every video follows one of a few recipes: a fixed order over step
//! prototypes. Segment frames are the step prototype plus noise, everything
//! else is background, and the last 5% of frames show an ending prototype.

use log::warn;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AnnotatedVideo, Sample, Split};
use crate::anchors::Segment;
use crate::encoder::VideoFeatures;
use crate::error::{Error, Result};
use crate::numerics::Array2;

const PLACEMENT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
    pub frames: usize,
    pub dim: usize,
    pub num_step_prototypes: usize,
    pub num_recipes: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    pub min_segment_len: usize,
    pub max_segment_len: usize,
    pub background_noise: f64,
    pub segment_noise: f64,
    /// Shifted copies per training video; 1 disables augmentation.
    pub augment_shifts: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_train: 100,
            num_val: 20,
            num_test: 20,
            frames: 500,
            dim: 64,
            num_step_prototypes: 16,
            num_recipes: 4,
            min_segments: 3,
            max_segments: 16,
            min_segment_len: 5,
            max_segment_len: 40,
            background_noise: 0.3,
            segment_noise: 0.3,
            augment_shifts: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// 200/30/30 videos of 64 frames, 16-d features, 3 to 6 segments.
    pub fn desk() -> Self {
        Self {
            num_train: 200,
            num_val: 30,
            num_test: 30,
            frames: 64,
            dim: 16,
            num_step_prototypes: 8,
            num_recipes: 3,
            min_segments: 3,
            max_segments: 6,
            min_segment_len: 4,
            max_segment_len: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.frames == 0 || self.dim == 0 {
            return bad("frames and dim must be positive");
        }
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return bad("segment count range must satisfy 1 <= min <= max");
        }
        if self.frames < 2 * self.max_segments {
            return bad("frames must be at least twice max_segments");
        }
        if self.min_segment_len == 0 || self.min_segment_len > self.max_segment_len {
            return bad("segment length range must satisfy 1 <= min <= max");
        }
        if self.num_step_prototypes == 0 || self.num_recipes == 0 {
            return bad("need at least one step prototype and one recipe");
        }
        if self.augment_shifts == 0 {
            return bad("augment_shifts must be at least 1");
        }
        if !(self.background_noise >= 0.0 && self.segment_noise >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        Ok(())
    }

    pub fn ending_frames(&self) -> usize {
        (self.frames as f64 * 0.05).ceil() as usize
    }
}

/// Enough to re-render a video: its annotation, step per segment and noise seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthVideo {
    pub video: AnnotatedVideo,
    pub steps: Vec<usize>,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    /// Step prototypes, then background, then ending.
    pub prototypes: Array2<f64>,
    pub recipes: Vec<Vec<usize>>,
    pub videos: Vec<SynthVideo>,
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

/// Lays out `lens` in `[lo, hi)` with gaps of at least one frame between them.
fn pack<R: Rng + ?Sized>(rng: &mut R, lens: &[usize], lo: usize, hi: usize) -> Option<Vec<Segment>> {
    if lens.is_empty() {
        return Some(Vec::new());
    }
    let need = lens.iter().sum::<usize>() + lens.len() - 1;
    let cap = hi.checked_sub(lo)?;
    let free = cap.checked_sub(need)?;
    // stars and bars over n+1 bins
    let n = lens.len();
    let mut cuts = sample(rng, free + n, n).into_vec();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(n);
    let mut pos = lo;
    let mut prev = 0;
    for (i, (&len, &cut)) in lens.iter().zip(&cuts).enumerate() {
        let extra = cut - prev - usize::from(i > 0);
        prev = cut;
        pos += extra + usize::from(i > 0);
        out.push(Segment {
            start: pos,
            end: pos + len,
        });
        pos += len;
    }
    debug_assert!(pos <= hi);
    Some(out)
}

impl SynthCorpus {
    pub fn generate(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p = config.num_step_prototypes;
        let prototypes = Array2::from_fn(p + 2, config.dim, |_, _| f32_round(rng.sample(StandardNormal)));
        let recipes = (0..config.num_recipes)
            .map(|_| {
                let mut order: Vec<usize> = (0..p).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect();
        let mut corpus = Self {
            config,
            prototypes,
            recipes,
            videos: Vec::new(),
        };
        let splits = [
            (Split::Train, corpus.config.num_train),
            (Split::Val, corpus.config.num_val),
            (Split::Test, corpus.config.num_test),
        ];
        for (split, count) in splits {
            for i in 0..count {
                let id = format!("{split}_{i:04}");
                let v = corpus.draw_video(&mut rng, id, split)?;
                corpus.videos.push(v);
            }
        }
        Ok(corpus)
    }

    fn draw_video<R: Rng + ?Sized>(&self, rng: &mut R, id: String, split: Split) -> Result<SynthVideo> {
        let c = &self.config;
        let half = c.frames / 2;
        let usable = c.frames - c.ending_frames();
        let recipe = &self.recipes[rng.random_range(0..self.recipes.len())];
        let mut n = rng.random_range(c.min_segments..=c.max_segments);
        let segments = 'outer: loop {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let lens: Vec<usize> = (0..n)
                    .map(|_| rng.random_range(c.min_segment_len..=c.max_segment_len))
                    .collect();
                let n1 = rng.random_range(0..=n);
                let first = pack(rng, &lens[..n1], 0, half);
                let second = pack(rng, &lens[n1..], half + 1, usable);
                if let (Some(mut a), Some(b)) = (first, second) {
                    a.extend(b);
                    break 'outer a;
                }
            }
            if n == 1 {
                return Err(Error::Config(format!(
                    "cannot place any segment of length {}..={} in {} frames",
                    c.min_segment_len, c.max_segment_len, c.frames
                )));
            }
            warn!("video {id}: could not place {n} segments, trying {}", n - 1);
            n -= 1;
        };
        let steps = (0..segments.len()).map(|j| recipe[j % recipe.len()]).collect();
        Ok(SynthVideo {
            video: AnnotatedVideo {
                id,
                num_frames: c.frames,
                segments,
                split,
            },
            steps,
            noise_seed: rng.random(),
        })
    }

    pub fn background_row(&self) -> usize {
        self.config.num_step_prototypes
    }

    pub fn ending_row(&self) -> usize {
        self.config.num_step_prototypes + 1
    }

    /// Prototype row shown at every frame of `v`.
    pub fn frame_rows(&self, v: &SynthVideo) -> Vec<usize> {
        let frames = v.video.num_frames;
        let mut rows = vec![self.background_row(); frames];
        for r in rows.iter_mut().skip(frames - self.config.ending_frames()) {
            *r = self.ending_row();
        }
        for (seg, &step) in v.video.segments.iter().zip(&v.steps) {
            rows[seg.start..seg.end].fill(step);
        }
        rows
    }

    pub fn render(&self, v: &SynthVideo) -> Result<VideoFeatures<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(v.noise_seed);
        let rows = self.frame_rows(v);
        let dim = self.config.dim;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for &r in &rows {
            let scale = if r < self.config.num_step_prototypes {
                self.config.segment_noise
            } else {
                self.config.background_noise
            };
            for d in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                data.push(f32_round(self.prototypes.get(r, d) + scale * noise));
            }
        }
        VideoFeatures::new(Array2::from_vec(rows.len(), dim, data)?)
    }

    /// Copies of `v` with every boundary moved right by
    /// `round(i * L / (4 * num_shifts))`, re-rendered with the same noise seed.
    /// Segments pushed past the end are dropped, partial ones clipped.
    pub fn temporal_shift_augment(&self, v: &SynthVideo, num_shifts: usize) -> Result<Vec<SynthVideo>> {
        if num_shifts == 0 {
            return Err(Error::Config("num_shifts must be at least 1".into()));
        }
        let frames = v.video.num_frames;
        let mut out = Vec::with_capacity(num_shifts);
        for i in 0..num_shifts {
            let offset = shift_offset(i, frames, num_shifts);
            let mut segments = Vec::new();
            let mut steps = Vec::new();
            for (seg, &step) in v.video.segments.iter().zip(&v.steps) {
                if seg.start + offset >= frames {
                    warn!("video {}: shift {offset} pushes segment {seg:?} out of range, dropped", v.video.id);
                    continue;
                }
                segments.push(Segment {
                    start: seg.start + offset,
                    end: (seg.end + offset).min(frames),
                });
                steps.push(step);
            }
            if segments.is_empty() {
                warn!("video {}: shift {offset} leaves no segments, copy skipped", v.video.id);
                continue;
            }
            let id = if i == 0 {
                v.video.id.clone()
            } else {
                format!("{}_shift{i}", v.video.id)
            };
            out.push(SynthVideo {
                video: AnnotatedVideo {
                    id,
                    segments,
                    ..v.video.clone()
                },
                steps,
                noise_seed: v.noise_seed,
            });
        }
        Ok(out)
    }

    /// Renders the corpus; training videos are expanded by `augment_shifts`.
    pub fn samples(&self) -> Result<Vec<Sample>> {
        let mut out = Vec::new();
        for v in &self.videos {
            let copies = if v.video.split == Split::Train {
                self.temporal_shift_augment(v, self.config.augment_shifts)?
            } else {
                vec![v.clone()]
            };
            for c in copies {
                let features = self.render(&c)?;
                out.push(Sample {
                    video: c.video,
                    features,
                });
            }
        }
        Ok(out)
    }
}

pub fn shift_offset(i: usize, frames: usize, num_shifts: usize) -> usize {
    (i as f64 * frames as f64 / (4.0 * num_shifts as f64)).round() as usize
}

pub fn synth_generate(config: SynthConfig) -> Result<Vec<Sample>> {
    SynthCorpus::generate(config)?.samples()
}

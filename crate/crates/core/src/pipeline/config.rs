use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::{build_anchor_lengths, AssignmentConfig};
use crate::decoder::Ablation;
use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::model::ModelConfig;
use crate::numerics::AdamHyper;

/// Every knob of a run. Serialized verbatim into each run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frames: usize,
    pub dim: usize,
    pub hidden: usize,
    pub anchor_min_len: usize,
    pub anchor_interval: usize,
    pub anchor_count: usize,
    pub pool_h: usize,
    pub pool_w: usize,
    /// Samples drawn per class for the proposal loss (`U`).
    pub samples_per_class: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub alpha_r: f64,
    pub alpha_s: f64,
    pub max_segments: usize,
    pub beam_size: usize,
    pub nms_iou: f64,
    pub n_uniform: usize,
    pub n_eval_proposals: usize,
    pub tp_iou: f64,
    pub pos_iou: f64,
    pub neg_iou: f64,
    pub epochs: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frames: 500,
            dim: 512,
            hidden: 512,
            anchor_min_len: 3,
            anchor_interval: 8,
            anchor_count: 16,
            pool_h: 8,
            pool_w: 4,
            samples_per_class: 100,
            learning_rate: 4e-5,
            beta1: 0.8,
            beta2: 0.999,
            epsilon: 1e-8,
            alpha_r: 1.0,
            alpha_s: 1.0,
            max_segments: 16,
            beam_size: 1,
            nms_iou: 0.5,
            n_uniform: 7,
            n_eval_proposals: 10,
            tp_iou: 0.5,
            pos_iou: 0.8,
            neg_iou: 0.2,
            epochs: 10,
            seed: 0,
            ablation: Ablation::default(),
        }
    }
}

impl RunConfig {
    /// Small model for 64-frame, 16-d synthetic videos.
    pub fn desk() -> Self {
        Self {
            frames: 64,
            dim: 16,
            hidden: 32,
            anchor_min_len: 3,
            anchor_interval: 2,
            anchor_count: 8,
            pool_h: 4,
            pool_w: 2,
            samples_per_class: 32,
            learning_rate: 2e-3,
            epochs: 20,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn anchor_lengths(&self) -> Result<Vec<usize>> {
        build_anchor_lengths(self.anchor_min_len, self.anchor_interval, self.anchor_count)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            frames: self.frames,
            dim: self.dim,
            hidden: self.hidden,
            anchor_lengths: self.anchor_lengths()?,
            pool_h: self.pool_h,
            pool_w: self.pool_w,
            ablation: self.ablation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha_r: self.alpha_r,
            alpha_s: self.alpha_s,
        }
    }

    pub fn assignment(&self) -> AssignmentConfig {
        AssignmentConfig {
            pos_iou: self.pos_iou,
            neg_iou: self.neg_iou,
            samples: self.samples_per_class,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config()?;
        self.adam().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if self.max_segments == 0 || self.beam_size == 0 {
            return bad("max_segments and beam_size must be positive".into());
        }
        if self.n_uniform == 0 || self.n_uniform > self.frames {
            return bad(format!("n_uniform must be in 1..={}", self.frames));
        }
        if self.n_eval_proposals == 0 {
            return bad("n_eval_proposals must be positive".into());
        }
        if !(self.pos_iou > self.neg_iou && self.neg_iou >= 0.0 && self.pos_iou <= 1.0) {
            return bad("need 0 <= neg_iou < pos_iou <= 1".into());
        }
        if !(self.alpha_r >= 0.0 && self.alpha_s >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.nms_iou) || !(0.0..=1.0).contains(&self.tp_iou) {
            return bad("IoU thresholds must be in [0, 1]".into());
        }
        Ok(())
    }
}

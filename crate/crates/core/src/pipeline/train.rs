use std::fmt;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, Checkpoint, Method, RunConfig};
use crate::anchors::assign_training_samples;
use crate::dataio::{Dataset, Sample, Split};
use crate::decoder::Ablation;
use crate::error::{Error, Result};
use crate::loss::LossReport;
use crate::metrics::EvalReport;
use crate::numerics::{adam_step, Parameterized};
use crate::Model;

/// One line of the training log; losses are means over the epoch's videos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_cla: f64,
    pub l_reg: f64,
    pub l_seq: f64,
    pub total: f64,
    pub val_jaccard: f64,
    pub val_miou: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} l_cla={:.6} l_reg={:.6} l_seq={:.6} val_jaccard={:.4} val_miou={:.4}",
            self.epoch, self.l_cla, self.l_reg, self.l_seq, self.val_jaccard, self.val_miou
        )
    }
}

/// Per-video SGD with Adam.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: RunConfig,
    pub model: Model,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Model::new(config.model_config()?, &mut rng)?;
        Ok(Self {
            config,
            model,
            rng,
            epoch: 0,
        })
    }

    pub fn from_checkpoint(c: Checkpoint) -> Self {
        Self {
            config: c.config,
            model: c.model,
            rng: c.rng,
            epoch: c.epoch,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            epoch: self.epoch,
            model: self.model.clone(),
            rng: self.rng.clone(),
        }
    }

    /// Samples anchors, accumulates gradients and applies one Adam update.
    pub fn step(&mut self, sample: &Sample) -> Result<LossReport> {
        let batch = assign_training_samples(
            &self.model.anchors(),
            &sample.video.segments,
            &self.config.assignment(),
            &mut self.rng,
        )?;
        self.model.zero_grads();
        let report = self
            .model
            .forward_backward(&sample.features, &sample.video.segments, &batch, &self.config.loss_weights())?;
        let hyper = self.config.adam();
        for slot in self.model.slots_mut() {
            adam_step(slot, &hyper)?;
        }
        Ok(report)
    }

    /// One pass over `train` in a shuffled order; returns mean losses.
    pub fn run_epoch(&mut self, train: &[&Sample]) -> Result<LossReport> {
        if train.is_empty() {
            return Err(Error::EmptyInput("training split"));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let epoch = self.epoch + 1;
        let mut sum = LossReport {
            l_cla: 0.0,
            l_reg: 0.0,
            l_seq: 0.0,
            total: 0.0,
        };
        for i in order {
            let s = train[i];
            let r = self.step(s).map_err(|e| Error::Training {
                context: format!("epoch {epoch}, video {}", s.video.id),
                message: e.to_string(),
            })?;
            sum.l_cla += r.l_cla;
            sum.l_reg += r.l_reg;
            sum.l_seq += r.l_seq;
            sum.total += r.total;
        }
        self.epoch = epoch;
        let n = train.len() as f64;
        Ok(LossReport {
            l_cla: sum.l_cla / n,
            l_reg: sum.l_reg / n,
            l_seq: sum.l_seq / n,
            total: sum.total / n,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Highest validation Jaccard (earliest on ties); the last epoch when
    /// there is no validation split.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochLog>,
}

pub fn train(config: &RunConfig, data: &Dataset) -> Result<TrainOutcome> {
    train_from(Trainer::new(config.clone())?, data, config.epochs)
}

/// Continues `trainer` for `epochs` more epochs.
pub fn train_from(mut trainer: Trainer, data: &Dataset, epochs: usize) -> Result<TrainOutcome> {
    let train_set = data.split(Split::Train);
    let val_set = data.split(Split::Val);
    if train_set.is_empty() && epochs > 0 {
        return Err(Error::EmptyInput("training split"));
    }
    let mut best = trainer.checkpoint();
    let mut best_score = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let loss = trainer.run_epoch(&train_set)?;
        let (val_jaccard, val_miou) = if val_set.is_empty() {
            (0.0, 0.0)
        } else {
            let r = evaluate(Method::ProcnetsLstm, Some(&trainer.model), &trainer.config, &val_set, "val")?;
            (r.jaccard, r.miou)
        };
        let line = EpochLog {
            epoch: trainer.epoch,
            l_cla: loss.l_cla,
            l_reg: loss.l_reg,
            l_seq: loss.l_seq,
            total: loss.total,
            val_jaccard,
            val_miou,
        };
        info!("{line}");
        log.push(line);
        if val_set.is_empty() || val_jaccard > best_score {
            best_score = val_jaccard;
            best = trainer.checkpoint();
        }
    }
    Ok(TrainOutcome {
        best,
        last: trainer.checkpoint(),
        log,
    })
}

/// The three decoder-input ablations.
pub fn ablation_variants() -> [Ablation; 3] {
    [
        Ablation {
            drop_proposal_vec: true,
            ..Ablation::default()
        },
        Ablation {
            drop_location_emb: true,
            ..Ablation::default()
        },
        Ablation {
            drop_segment_content: true,
            ..Ablation::default()
        },
    ]
}

/// Trains one model per ablation from the same seed and reports each on `split`.
pub fn ablation_study(config: &RunConfig, data: &Dataset, split: Split) -> Result<Vec<EvalReport>> {
    let eval_set = data.split(split);
    ablation_variants()
        .into_iter()
        .map(|ablation| {
            let cfg = RunConfig {
                ablation,
                ..config.clone()
            };
            let out = train(&cfg, data)?;
            evaluate(Method::ProcnetsLstm, Some(&out.best.model), &cfg, &eval_set, split.as_str())
        })
        .collect()
}

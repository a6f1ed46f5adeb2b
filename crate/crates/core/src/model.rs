//! The full network: context encoder, proposal head and sequence decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anchors::{AnchorGrid, AssignmentBatch, Segment};
use crate::decoder::{build_candidate_grid, grid_size, pool_backward, Ablation, CandidateGrid, Emission, SequenceDecoder};
use crate::encoder::{ContextEncoder, VideoFeatures};
use crate::error::{Error, Result};
use crate::loss::{composite_loss, LossReport, LossWeights};
use crate::numerics::{ParamSlot, Parameterized};
use crate::proposal::{ProposalHead, ProposalMap};
use crate::scalar::Scalar;

/// Architecture hyperparameters. The video length is fixed because the
/// decoder's class count depends on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub frames: usize,
    pub dim: usize,
    pub hidden: usize,
    pub anchor_lengths: Vec<usize>,
    pub pool_h: usize,
    pub pool_w: usize,
    pub ablation: Ablation,
}

impl ModelConfig {
    pub fn num_candidates(&self) -> usize {
        grid_size(self.anchor_lengths.len(), self.frames, self.pool_h, self.pool_w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.dim == 0 || self.hidden == 0 {
            return Err(Error::Config(format!(
                "frames, dim and hidden must be positive (got {}, {}, {})",
                self.frames, self.dim, self.hidden
            )));
        }
        if self.anchor_lengths.is_empty() || self.pool_h == 0 || self.pool_w == 0 {
            return Err(Error::Config("need anchors and a non-empty pooling window".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProcNets<T> {
    pub config: ModelConfig,
    pub encoder: ContextEncoder<T>,
    pub head: ProposalHead<T>,
    pub decoder: SequenceDecoder<T>,
}

/// Head outputs for one video.
#[derive(Debug, Clone)]
pub struct Proposals<T> {
    pub map: ProposalMap<T>,
    pub grid: CandidateGrid<T>,
}

impl<T: Scalar> ProcNets<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let encoder = ContextEncoder::new(config.dim, config.hidden, rng);
        let head = ProposalHead::new(&config.anchor_lengths, config.dim, rng)?;
        let mut decoder = SequenceDecoder::new(config.num_candidates(), config.dim, config.hidden, rng);
        decoder.ablation = config.ablation;
        Ok(Self {
            config,
            encoder,
            head,
            decoder,
        })
    }

    pub fn anchors(&self) -> AnchorGrid {
        AnchorGrid::new(self.config.anchor_lengths.clone(), self.config.frames)
    }

    pub fn check_video(&self, x: &VideoFeatures<T>) -> Result<()> {
        if x.frames() != self.config.frames || x.dim() != self.config.dim {
            return Err(Error::Config(format!(
                "model expects {}x{} features, video is {}x{}",
                self.config.frames,
                self.config.dim,
                x.frames(),
                x.dim()
            )));
        }
        Ok(())
    }

    pub fn propose(&self, x: &VideoFeatures<T>) -> Result<Proposals<T>> {
        self.check_video(x)?;
        let (ctx, _) = self.encoder.encode(x)?;
        let map = self.head.propose(&ctx)?;
        let grid = build_candidate_grid(&map, self.config.pool_h, self.config.pool_w, &self.anchors())?;
        Ok(Proposals { map, grid })
    }

    /// Ordered segments chosen by the decoder.
    pub fn segment(&self, x: &VideoFeatures<T>, beam_size: usize, max_segments: usize) -> Result<(Proposals<T>, Vec<Emission>)> {
        let props = self.propose(x)?;
        let out = self.decoder.decode(&props.grid, x, beam_size, max_segments)?;
        Ok((props, out))
    }

    /// Loss of one training video for a fixed sample assignment.
    pub fn loss(
        &self,
        x: &VideoFeatures<T>,
        gts: &[Segment],
        batch: &AssignmentBatch<T>,
        weights: &LossWeights,
    ) -> Result<LossReport> {
        let props = self.propose(x)?;
        let tf = self.decoder.teacher_forced(&props.grid, x, gts)?;
        let (report, _) = composite_loss(&props.map, batch, &tf.probs, &tf.targets, weights)?;
        Ok(report)
    }

    /// Like [`ProcNets::loss`], and accumulates gradients into every slot.
    pub fn forward_backward(
        &mut self,
        x: &VideoFeatures<T>,
        gts: &[Segment],
        batch: &AssignmentBatch<T>,
        weights: &LossWeights,
    ) -> Result<LossReport> {
        self.check_video(x)?;
        let (ctx, etrace) = self.encoder.encode(x)?;
        let map = self.head.propose(&ctx)?;
        let grid = build_candidate_grid(&map, self.config.pool_h, self.config.pool_w, &self.anchors())?;
        let tf = self.decoder.teacher_forced(&grid, x, gts)?;
        let (report, mut grads) = composite_loss(&map, batch, &tf.probs, &tf.targets, weights)?;

        let ds = self.decoder.backward(&tf, &grads.dlogits);
        pool_backward(&grid, &ds, &mut grads.dmap.scores);
        let dctx = self.head.backward(&ctx, &map, &grads.dmap);
        self.encoder.backward(&etrace, &dctx);
        Ok(report)
    }
}

impl<T: Scalar> Parameterized<T> for ProcNets<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        let mut v = self.encoder.slots();
        v.extend(self.head.slots());
        v.extend(self.decoder.slots());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        let mut v = self.encoder.slots_mut();
        v.extend(self.head.slots_mut());
        v.extend(self.decoder.slots_mut());
        v
    }
}

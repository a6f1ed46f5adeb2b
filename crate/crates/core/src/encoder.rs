//! Context-aware frame encoding: a bidirectional LSTM over the raw frame
//! features, concatenated back onto them and linearly reduced to the input
//! width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Affine, Array2, BiLstm, BiLstmTrace, ParamSlot, Parameterized};
use crate::scalar::Scalar;

/// `L x D` matrix of per-frame feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VideoFeatures<T> {
    matrix: Array2<T>,
}

impl<T: Scalar> VideoFeatures<T> {
    pub fn new(matrix: Array2<T>) -> Result<Self> {
        if matrix.rows() == 0 {
            return Err(Error::EmptyInput("video with zero frames"));
        }
        if !matrix.is_finite() {
            return Err(Error::Config("video features contain non-finite values".into()));
        }
        Ok(Self { matrix })
    }

    pub fn frames(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.matrix
    }

    pub fn cast<U: Scalar>(&self) -> VideoFeatures<U> {
        VideoFeatures {
            matrix: self.matrix.cast(),
        }
    }
}

/// Frame-wise context-aware features, same shape as the input video.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextFeatures<T> {
    pub matrix: Array2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ContextEncoder<T> {
    pub bilstm: BiLstm<T>,
    pub reduce: Affine<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace<T> {
    lstm: BiLstmTrace<T>,
    concat: Vec<Vec<T>>,
}

impl<T: Scalar> ContextEncoder<T> {
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            bilstm: BiLstm::new("encoder.bilstm", dim, hidden, rng),
            reduce: Affine::new("encoder.reduce", dim + 2 * hidden, dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.reduce.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.bilstm.hidden()
    }

    pub fn encode(&self, x: &VideoFeatures<T>) -> Result<(ContextFeatures<T>, EncoderTrace<T>)> {
        if x.dim() != self.dim() {
            return Err(Error::Config(format!(
                "encoder expects {}-dim frames, video has {}",
                self.dim(),
                x.dim()
            )));
        }
        let (h, lstm) = self.bilstm.forward(x.matrix())?;
        let frames = x.frames();
        let mut out = Array2::zeros(frames, self.dim());
        let mut concat = Vec::with_capacity(frames);
        for t in 0..frames {
            let mut z = x.matrix().row(t).to_vec();
            z.extend_from_slice(h.row(t));
            out.row_mut(t).copy_from_slice(&self.reduce.forward(&z)?);
            concat.push(z);
        }
        Ok((ContextFeatures { matrix: out }, EncoderTrace { lstm, concat }))
    }

    /// Backpropagates `dL/db`; input-feature gradients are discarded.
    pub fn backward(&mut self, trace: &EncoderTrace<T>, dctx: &Array2<T>) {
        let dim = self.dim();
        let hd = self.hidden();
        let mut dh = Array2::zeros(dctx.rows(), 2 * hd);
        for (t, z) in trace.concat.iter().enumerate() {
            let dz = self.reduce.backward(z, dctx.row(t));
            dh.row_mut(t).copy_from_slice(&dz[dim..]);
        }
        self.bilstm.backward(&trace.lstm, &dh);
    }
}

impl<T: Scalar> Parameterized<T> for ContextEncoder<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        let mut v = self.bilstm.slots();
        v.extend(self.reduce.slots());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        let mut v = self.bilstm.slots_mut();
        v.extend(self.reduce.slots_mut());
        v
    }
}

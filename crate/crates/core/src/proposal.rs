//! Proposal head: one temporal convolution per anchor length over the
//! context features, giving a score and two offsets per (anchor, frame).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anchors::OffsetPair;
use crate::encoder::ContextFeatures;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Array2, ParamSlot, Parameterized, TemporalConv};
use crate::scalar::Scalar;

/// `K x L` score map in (0, 1) and two `K x L` offset maps in (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalMap<T> {
    pub scores: Array2<T>,
    pub offsets_c: Array2<T>,
    pub offsets_l: Array2<T>,
}

impl<T: Scalar> ProposalMap<T> {
    pub fn num_lengths(&self) -> usize {
        self.scores.rows()
    }

    pub fn frames(&self) -> usize {
        self.scores.cols()
    }

    pub fn offsets(&self, k: usize, t: usize) -> OffsetPair<T> {
        OffsetPair {
            theta_c: self.offsets_c.get(k, t),
            theta_l: self.offsets_l.get(k, t),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let (k, l) = self.scores.shape();
        Self {
            scores: Array2::zeros(k, l),
            offsets_c: Array2::zeros(k, l),
            offsets_l: Array2::zeros(k, l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProposalHead<T> {
    pub convs: Vec<TemporalConv<T>>,
}

impl<T: Scalar> ProposalHead<T> {
    pub fn new<R: Rng + ?Sized>(lengths: &[usize], dim: usize, rng: &mut R) -> Result<Self> {
        let convs = lengths
            .iter()
            .map(|&l| TemporalConv::new(&format!("proposal.conv{l}"), l, dim, 3, rng))
            .collect::<Result<_>>()?;
        Ok(Self { convs })
    }

    pub fn zeros(lengths: &[usize], dim: usize) -> Result<Self> {
        let convs = lengths
            .iter()
            .map(|&l| TemporalConv::zeros(&format!("proposal.conv{l}"), l, dim, 3))
            .collect::<Result<_>>()?;
        Ok(Self { convs })
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.convs.iter().map(TemporalConv::kernel_width).collect()
    }

    pub fn check_lengths(&self, lengths: &[usize]) -> Result<()> {
        if self.lengths() != lengths {
            return Err(Error::Config(format!(
                "proposal head built for anchor lengths {:?}, asked for {:?}",
                self.lengths(),
                lengths
            )));
        }
        Ok(())
    }

    pub fn propose(&self, ctx: &ContextFeatures<T>) -> Result<ProposalMap<T>> {
        let k = self.convs.len();
        let frames = ctx.matrix.rows();
        let mut map = ProposalMap {
            scores: Array2::zeros(k, frames),
            offsets_c: Array2::zeros(k, frames),
            offsets_l: Array2::zeros(k, frames),
        };
        for (row, conv) in self.convs.iter().enumerate() {
            let out = conv.forward(&ctx.matrix)?;
            for t in 0..frames {
                map.scores.set(row, t, sigmoid(out.get(t, 0)));
                map.offsets_c.set(row, t, out.get(t, 1).tanh());
                map.offsets_l.set(row, t, out.get(t, 2).tanh());
            }
        }
        Ok(map)
    }

    /// Chains `dL/d(map)` through the activations and convolutions; returns
    /// `dL/d(context features)`.
    pub fn backward(&mut self, ctx: &ContextFeatures<T>, map: &ProposalMap<T>, dmap: &ProposalMap<T>) -> Array2<T> {
        let frames = ctx.matrix.rows();
        let one = T::one();
        let mut dctx = Array2::zeros(frames, ctx.matrix.cols());
        for (row, conv) in self.convs.iter_mut().enumerate() {
            let mut dout = Array2::zeros(frames, 3);
            let mut any = false;
            for t in 0..frames {
                let s = map.scores.get(row, t);
                let oc = map.offsets_c.get(row, t);
                let ol = map.offsets_l.get(row, t);
                let g = [
                    dmap.scores.get(row, t) * s * (one - s),
                    dmap.offsets_c.get(row, t) * (one - oc * oc),
                    dmap.offsets_l.get(row, t) * (one - ol * ol),
                ];
                for (c, v) in g.into_iter().enumerate() {
                    if v != T::zero() {
                        any = true;
                        dout.set(t, c, v);
                    }
                }
            }
            if !any {
                continue;
            }
            let d = conv.backward(&ctx.matrix, &dout);
            for (a, &b) in dctx.as_mut_slice().iter_mut().zip(d.as_slice()) {
                *a += b;
            }
        }
        dctx
    }
}

impl<T: Scalar> Parameterized<T> for ProposalHead<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        self.convs.iter().flat_map(|c| c.slots()).collect()
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        self.convs.iter_mut().flat_map(|c| c.slots_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::build_anchor_lengths;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(frames: usize, dim: usize, seed: u64) -> ContextFeatures<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ContextFeatures {
            matrix: Array2::from_fn(frames, dim, |_, _| rng.random_range(-1.0..1.0)),
        }
    }

    #[test]
    fn zero_head_gives_half_scores_and_zero_offsets() {
        let head = ProposalHead::<f64>::zeros(&[3, 11], 4).unwrap();
        let map = head.propose(&ctx(8, 4, 0)).unwrap();
        assert_eq!(map.scores.shape(), (2, 8));
        assert!(map.scores.as_slice().iter().all(|&s| s == 0.5));
        assert!(map.offsets_c.as_slice().iter().all(|&s| s == 0.0));
        assert!(map.offsets_l.as_slice().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_map_shape() {
        let lengths = build_anchor_lengths(3, 8, 16).unwrap();
        let head = ProposalHead::<f32>::zeros(&lengths, 2).unwrap();
        let c = ContextFeatures {
            matrix: Array2::<f32>::zeros(500, 2),
        };
        let map = head.propose(&c).unwrap();
        assert_eq!(map.scores.shape(), (16, 500));
        assert_eq!(map.offsets_l.shape(), (16, 500));
    }

    #[test]
    fn receptive_field_is_half_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = ProposalHead::<f64>::new(&[3, 11], 3, &mut rng).unwrap();
        let base = ctx(30, 3, 1);
        let m0 = head.propose(&base).unwrap();
        let mut bumped = base.clone();
        bumped.matrix.add_at(15, 1, 1.0);
        let m1 = head.propose(&bumped).unwrap();
        for (k, half) in [(0usize, 1usize), (1, 5)] {
            for t in 0..30 {
                let changed = m0.scores.get(k, t) != m1.scores.get(k, t);
                assert_eq!(changed, t.abs_diff(15) <= half, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn wide_kernel_row_zero_pads() {
        // Row with l=11 at frame 0 sees frames 0..=5, i.e. 5 padded frames.
        let mut head = ProposalHead::<f64>::zeros(&[3, 11], 1).unwrap();
        head.convs[1].weight.value.fill(1.0);
        let c = ContextFeatures {
            matrix: Array2::from_fn(8, 1, |_, _| 1.0),
        };
        let map = head.propose(&c).unwrap();
        assert!((map.scores.get(1, 0) - sigmoid(6.0)).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let head = ProposalHead::<f64>::zeros(&[3, 11], 1).unwrap();
        assert!(head.check_lengths(&[3, 11, 19]).is_err());
    }
}

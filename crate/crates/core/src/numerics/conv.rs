use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Array2, ParamSlot, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stride-1 temporal convolution with `(k-1)/2` frames of zero padding per side.
///
/// The weight is `out x (k * D)`; column `j * D + d` is tap `j` (frame offset
/// `j - (k-1)/2`) on input channel `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TemporalConv<T> {
    pub weight: ParamSlot<T>,
    pub bias: ParamSlot<T>,
    kernel_width: usize,
    channels: usize,
}

impl<T: Scalar> TemporalConv<T> {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        kernel_width: usize,
        channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_width(kernel_width)?;
        let fan_in = kernel_width * channels;
        Ok(Self {
            weight: ParamSlot::uniform(format!("{name}.weight"), out_channels, fan_in, fan_in, rng),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, out_channels),
            kernel_width,
            channels,
        })
    }

    pub fn zeros(name: &str, kernel_width: usize, channels: usize, out_channels: usize) -> Result<Self> {
        check_width(kernel_width)?;
        Ok(Self {
            weight: ParamSlot::zeros(format!("{name}.weight"), out_channels, kernel_width * channels),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, out_channels),
            kernel_width,
            channels,
        })
    }

    pub fn kernel_width(&self) -> usize {
        self.kernel_width
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.rows()
    }

    fn pad(&self) -> usize {
        (self.kernel_width - 1) / 2
    }

    /// Valid tap range for output frame `t` of a length-`len` input.
    fn taps(&self, t: usize, len: usize) -> std::ops::Range<usize> {
        let pad = self.pad();
        let lo = pad.saturating_sub(t);
        let hi = self.kernel_width.min(len + pad - t);
        lo..hi
    }

    pub fn forward(&self, input: &Array2<T>) -> Result<Array2<T>> {
        if input.cols() != self.channels {
            return Err(Error::dimension(
                format!("L x {}", self.channels),
                input.shape_str(),
            ));
        }
        let len = input.rows();
        let (pad, dim) = (self.pad(), self.channels);
        let outs = self.out_channels();
        let mut out = Array2::zeros(len, outs);
        for t in 0..len {
            for o in 0..outs {
                let wrow = self.weight.value.row(o);
                let mut acc = self.bias.value.get(0, o);
                for j in self.taps(t, len) {
                    let src = input.row(t + j - pad);
                    let w = &wrow[j * dim..(j + 1) * dim];
                    for (a, b) in w.iter().zip(src) {
                        acc += *a * *b;
                    }
                }
                out.set(t, o, acc);
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients; returns `dL/dinput`.
    pub fn backward(&mut self, input: &Array2<T>, dout: &Array2<T>) -> Array2<T> {
        let len = input.rows();
        let (pad, dim) = (self.pad(), self.channels);
        let mut dinput = Array2::zeros(len, dim);
        for t in 0..len {
            for o in 0..self.out_channels() {
                let g = dout.get(t, o);
                if g == T::zero() {
                    continue;
                }
                self.bias.grad.add_at(0, o, g);
                for j in self.taps(t, len) {
                    let src = t + j - pad;
                    let w = &self.weight.value.row(o)[j * dim..(j + 1) * dim];
                    for (d, &wv) in dinput.row_mut(src).iter_mut().zip(w) {
                        *d += g * wv;
                    }
                    let x = input.row(src);
                    let gw = &mut self.weight.grad.row_mut(o)[j * dim..(j + 1) * dim];
                    for (d, &xv) in gw.iter_mut().zip(x) {
                        *d += g * xv;
                    }
                }
            }
        }
        dinput
    }
}

fn check_width(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::Config(format!("temporal kernel width must be odd, got {k}")));
    }
    Ok(())
}

impl<T: Scalar> Parameterized<T> for TemporalConv<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        vec![&self.weight, &self.bias]
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::array::{matvec_acc, matvec_backward};
use super::{Array2, ParamSlot, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `W x + b` without checking anything but shapes.
pub fn affine<T: Scalar>(x: &[T], w: &Array2<T>, b: &[T]) -> Result<Vec<T>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::dimension(
            format!("W {} with x[{}] and b[{}]", w.shape_str(), w.cols(), w.rows()),
            format!("x[{}], b[{}]", x.len(), b.len()),
        ));
    }
    let mut y = b.to_vec();
    matvec_acc(w, x, &mut y);
    Ok(y)
}

/// Fully connected layer. The bias is stored as a `1 x out` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Affine<T> {
    pub weight: ParamSlot<T>,
    pub bias: ParamSlot<T>,
}

impl<T: Scalar> Affine<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: ParamSlot::uniform(format!("{name}.weight"), output, input, input, rng),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, output),
        }
    }

    pub fn zeros(name: &str, input: usize, output: usize) -> Self {
        Self {
            weight: ParamSlot::zeros(format!("{name}.weight"), output, input),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        affine(x, &self.weight.value, self.bias.value.row(0))
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); x.len()];
        matvec_backward(&self.weight.value, &mut self.weight.grad, x, dy, &mut dx);
        for (g, &d) in self.bias.grad.row_mut(0).iter_mut().zip(dy) {
            *g += d;
        }
        dx
    }
}

impl<T: Scalar> Parameterized<T> for Affine<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        vec![&self.weight, &self.bias]
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

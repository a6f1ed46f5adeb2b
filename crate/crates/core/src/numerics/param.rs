use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Array2;
use crate::scalar::Scalar;

/// A learnable array together with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParamSlot<T> {
    pub name: String,
    pub value: Array2<T>,
    pub grad: Array2<T>,
    pub adam_m: Array2<T>,
    pub adam_v: Array2<T>,
    pub step_count: u64,
}

impl<T: Scalar> ParamSlot<T> {
    pub fn new(name: impl Into<String>, value: Array2<T>) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Array2::zeros(r, c),
            adam_m: Array2::zeros(r, c),
            adam_v: Array2::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Array2::zeros(rows, cols))
    }

    /// Uniform(-s, s) with `s = 1/sqrt(fan_in)`.
    pub fn uniform<R: Rng + ?Sized>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let s = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Array2::from_fn(rows, cols, |_, _| T::of(rng.random_range(-s..s)));
        Self::new(name, value)
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Anything that owns learnable parameter slots.
pub trait Parameterized<T: Scalar> {
    fn slots(&self) -> Vec<&ParamSlot<T>>;
    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>>;

    fn zero_grads(&mut self) {
        for s in self.slots_mut() {
            s.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.slots().iter().map(|s| s.len()).sum()
    }
}

impl<T: Scalar> Parameterized<T> for ParamSlot<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        vec![self]
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        vec![self]
    }
}

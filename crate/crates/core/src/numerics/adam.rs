use serde::{Deserialize, Serialize};

use super::ParamSlot;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 4e-5,
            beta1: 0.8,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// One bias-corrected Adam update; the gradient is zeroed afterwards.
///
/// A slot whose gradient is identically zero is left untouched (value,
/// moments and step count), so parameters that took no part in a forward pass
/// do not drift on stale momentum.
pub fn adam_step<T: Scalar>(slot: &mut ParamSlot<T>, hyper: &AdamHyper) -> Result<()> {
    if let Some(bad) = slot.grad.as_slice().iter().find(|g| !g.is_finite()) {
        return Err(Error::Training {
            context: slot.name.clone(),
            message: format!("non-finite gradient {bad}"),
        });
    }
    if slot.grad.as_slice().iter().all(|&g| g == T::zero()) {
        return Ok(());
    }
    slot.step_count += 1;
    let t = slot.step_count as i32;
    let b1 = T::of(hyper.beta1);
    let b2 = T::of(hyper.beta2);
    let one = T::one();
    let corr1 = one - b1.powi(t);
    let corr2 = one - b2.powi(t);
    let lr = T::of(hyper.learning_rate);
    let eps = T::of(hyper.epsilon);

    let grads = slot.grad.as_slice();
    let m = slot.adam_m.as_mut_slice();
    let v = slot.adam_v.as_mut_slice();
    let w = slot.value.as_mut_slice();
    for i in 0..grads.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    slot.zero_grad();
    Ok(())
}

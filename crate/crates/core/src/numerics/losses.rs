//! Loss primitives and their derivatives.

use super::activations::{log_softmax, softmax};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scores are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

fn clamp_score<T: Scalar>(s: T) -> (T, bool) {
    let lo = T::of(BCE_CLAMP);
    let hi = T::one() - lo;
    if s < lo {
        (lo, true)
    } else if s > hi {
        (hi, true)
    } else {
        (s, false)
    }
}

/// Binary cross-entropy `-[y ln s + (1-y) ln(1-s)]` for a label in {0, 1}.
pub fn bce<T: Scalar>(score: T, positive: bool) -> T {
    let (s, _) = clamp_score(score);
    if positive {
        -s.ln()
    } else {
        -(T::one() - s).ln()
    }
}

/// `d bce / d score`; zero where the clamp is active.
pub fn bce_grad<T: Scalar>(score: T, positive: bool) -> T {
    let (s, clamped) = clamp_score(score);
    if clamped {
        T::zero()
    } else if positive {
        -T::one() / s
    } else {
        T::one() / (T::one() - s)
    }
}

/// Smooth L1 averaged over elements: `0.5 d^2` when `|d| < 1`, else `|d| - 0.5`.
pub fn smooth_l1<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let n = T::of_usize(pred.len().max(1));
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = (p - t).abs();
            if d < T::one() {
                T::of(0.5) * d * d
            } else {
                d - T::of(0.5)
            }
        })
        .sum::<T>()
        / n
}

/// Gradient of [`smooth_l1`] with respect to `pred`.
pub fn smooth_l1_grad<T: Scalar>(pred: &[T], target: &[T]) -> Vec<T> {
    let n = T::of_usize(pred.len().max(1));
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            let g = if d.abs() < T::one() { d } else { d.signum() };
            g / n
        })
        .collect()
}

/// `-ln softmax(logits)[target]`, plus the softmax probabilities.
pub fn softmax_ce<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(Error::OutOfRange {
            index: target,
            limit: logits.len(),
        });
    }
    let loss = -log_softmax(logits)[target];
    Ok((loss, softmax(logits)))
}

/// `d softmax_ce / d logits = p - onehot(target)`.
pub fn softmax_ce_grad<T: Scalar>(probs: &[T], target: usize) -> Vec<T> {
    let mut g = probs.to_vec();
    g[target] -= T::one();
    g
}

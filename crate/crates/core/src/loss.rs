//! Training objective: proposal classification (BCE), offset regression
//! (smooth L1) and sequence prediction (cross-entropy), weighted and summed.

use serde::{Deserialize, Serialize};

use crate::anchors::AssignmentBatch;
use crate::error::{Error, Result};
use crate::numerics::losses::{bce, bce_grad, smooth_l1, smooth_l1_grad, softmax_ce_grad};
use crate::proposal::ProposalMap;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_r: f64,
    pub alpha_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_r: 1.0,
            alpha_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_cla: f64,
    pub l_reg: f64,
    pub l_seq: f64,
    pub total: f64,
}

/// Gradients of the total loss with respect to the head outputs and the
/// decoder logits.
#[derive(Debug, Clone)]
pub struct LossGrads<T> {
    pub dmap: ProposalMap<T>,
    pub dlogits: Vec<Vec<T>>,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Training {
            context: name.into(),
            message: format!("loss component is {v}"),
        })
    }
}

/// Evaluates the composite loss and its gradients.
///
/// The sequence term averages over all `N + 1` decoding steps, the last of
/// which targets the end token. Positives whose target offsets fall outside
/// the tanh range are classified but not regressed.
pub fn composite_loss<T: Scalar>(
    map: &ProposalMap<T>,
    batch: &AssignmentBatch<T>,
    probs: &[Vec<T>],
    targets: &[usize],
    weights: &LossWeights,
) -> Result<(LossReport, LossGrads<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("assignment batch"));
    }
    if probs.is_empty() || probs.len() != targets.len() {
        return Err(Error::dimension(
            format!("{} decoder steps", targets.len()),
            format!("{} distributions", probs.len()),
        ));
    }
    let mut dmap = map.zeros_like();

    let n_cls = T::of_usize(batch.len());
    let mut l_cla = T::zero();
    for p in &batch.positives {
        let s = map.scores.get(p.k, p.t);
        l_cla += bce(s, true);
        dmap.scores.add_at(p.k, p.t, bce_grad(s, true) / n_cls);
    }
    for &(k, t) in &batch.negatives {
        let s = map.scores.get(k, t);
        l_cla += bce(s, false);
        dmap.scores.add_at(k, t, bce_grad(s, false) / n_cls);
    }
    l_cla /= n_cls;

    let regressed: Vec<_> = batch.positives.iter().filter(|p| p.target.representable()).collect();
    let mut l_reg = T::zero();
    if !regressed.is_empty() {
        let n_reg = T::of_usize(regressed.len());
        let scale = T::of(weights.alpha_r) / n_reg;
        for p in regressed {
            let pred = map.offsets(p.k, p.t).as_array();
            let target = p.target.as_array();
            l_reg += smooth_l1(&pred, &target);
            let g = smooth_l1_grad(&pred, &target);
            dmap.offsets_c.add_at(p.k, p.t, g[0] * scale);
            dmap.offsets_l.add_at(p.k, p.t, g[1] * scale);
        }
        l_reg /= n_reg;
    }

    let n_seq = T::of_usize(probs.len());
    let seq_scale = T::of(weights.alpha_s) / n_seq;
    let mut l_seq = T::zero();
    let mut dlogits = Vec::with_capacity(probs.len());
    for (p, &target) in probs.iter().zip(targets) {
        if target >= p.len() {
            return Err(Error::OutOfRange {
                index: target,
                limit: p.len(),
            });
        }
        l_seq -= p[target].ln();
        dlogits.push(softmax_ce_grad(p, target).into_iter().map(|g| g * seq_scale).collect());
    }
    l_seq /= n_seq;

    let l_cla = finite("l_cla", l_cla.as_f64())?;
    let l_reg = finite("l_reg", l_reg.as_f64())?;
    let l_seq = finite("l_seq", l_seq.as_f64())?;
    let report = LossReport {
        l_cla,
        l_reg,
        l_seq,
        total: l_cla + weights.alpha_r * l_reg + weights.alpha_s * l_seq,
    };
    Ok((report, LossGrads { dmap, dlogits }))
}

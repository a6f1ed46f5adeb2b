use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::anchors::Segment;
use crate::dataio::{permute_halves, PredictedSegment, Sample, VideoPredictions};
use crate::decoder::{map_proposals, nms_select, rank_by_score, uniform_segments, Emission, Scored};
use crate::error::{Error, Result};
use crate::metrics::{EvalReport, VideoEval};
use crate::model::Proposals;
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ProcnetsLstm,
    ProcnetsNms,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ProcnetsLstm, Method::ProcnetsNms, Method::Uniform];

    pub fn name(&self) -> &'static str {
        match self {
            Method::ProcnetsLstm => "procnets-lstm",
            Method::ProcnetsNms => "procnets-nms",
            Method::Uniform => "uniform",
        }
    }

    pub fn needs_model(&self) -> bool {
        *self != Method::Uniform
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method {s:?} (procnets-lstm|procnets-nms|uniform)")))
    }
}

/// Decoder output for one video; scores are the step probabilities.
pub fn infer(model: &Model, config: &RunConfig, sample: &Sample) -> Result<Vec<Emission>> {
    let (_, out) = model.segment(&sample.features, config.beam_size, config.max_segments)?;
    Ok(out)
}

pub fn to_predictions(id: &str, emissions: &[Emission]) -> VideoPredictions {
    VideoPredictions {
        id: id.to_string(),
        segments: emissions
            .iter()
            .map(|e| PredictedSegment {
                start_frame: e.segment.start,
                end_frame: e.segment.end,
                score: e.prob,
            })
            .collect(),
    }
}

/// The `n` best pooled candidates by proposal score.
fn top_candidates(props: &Proposals<f64>, n: usize) -> Vec<Scored> {
    let mut all: Vec<Scored> = props
        .grid
        .cells
        .iter()
        .map(|c| Scored {
            segment: c.segment,
            score: c.score,
        })
        .collect();
    rank_by_score(&mut all);
    all.truncate(n);
    all
}

fn uniform_scored(frames: usize, n: usize) -> Result<Vec<Scored>> {
    Ok(uniform_segments(frames, n)?
        .into_iter()
        .enumerate()
        .map(|(i, segment)| Scored {
            segment,
            score: 1.0 - i as f64 / n as f64,
        })
        .collect())
}

/// Segments scored for localization (Jaccard, mIoU) and for recall and
/// precision at `n_eval_proposals`.
pub fn predict(method: Method, model: Option<&Model>, config: &RunConfig, sample: &Sample) -> Result<(Vec<Segment>, Vec<Scored>)> {
    let frames = sample.features.frames();
    let model = match (method.needs_model(), model) {
        (true, Some(m)) => Some(m),
        (true, None) => return Err(Error::Usage(format!("method {} needs a checkpoint", method.name()))),
        (false, _) => None,
    };
    match method {
        Method::Uniform => {
            let preds = uniform_segments(frames, config.n_uniform)?;
            let prf = uniform_scored(frames, config.n_eval_proposals.min(frames))?;
            Ok((preds, prf))
        }
        Method::ProcnetsNms => {
            let model = model.expect("checked above");
            let props = model.propose(&sample.features)?;
            let all = map_proposals(&props.map, &model.anchors());
            let preds = nms_select(&all, config.nms_iou, config.n_uniform)
                .into_iter()
                .map(|s| s.segment)
                .collect();
            Ok((preds, nms_select(&all, config.nms_iou, config.n_eval_proposals)))
        }
        Method::ProcnetsLstm => {
            let model = model.expect("checked above");
            let (props, out) = model.segment(&sample.features, config.beam_size, config.max_segments)?;
            let preds = out.iter().map(|e| e.segment).collect();
            Ok((preds, top_candidates(&props, config.n_eval_proposals)))
        }
    }
}

fn report_ablation(method: Method, model: Option<&Model>) -> String {
    match (method.needs_model(), model) {
        (true, Some(m)) => m.config.ablation.label(),
        _ => "none".into(),
    }
}

/// Corpus report over `samples`; videos without ground truth are skipped.
pub fn evaluate(method: Method, model: Option<&Model>, config: &RunConfig, samples: &[&Sample], split: &str) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let (preds, prf) = predict(method, model, config, s)?;
        if let Some(row) = VideoEval::compute(&s.video.id, &preds, &s.video.segments, &prf, config.tp_iou) {
            rows.push(row);
        }
    }
    Ok(EvalReport::from_videos(method.name(), split, &report_ablation(method, model), rows))
}

/// Scores stored predictions; for files written by `infer`, this matches
/// evaluating the decoder directly except for recall and precision, which
/// here use the stored segments themselves.
pub fn evaluate_predictions(
    predictions: &[VideoPredictions],
    config: &RunConfig,
    samples: &[&Sample],
    method: &str,
    split: &str,
) -> Result<EvalReport> {
    let by_id: std::collections::BTreeMap<&str, &VideoPredictions> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let p = by_id
            .get(s.video.id.as_str())
            .ok_or_else(|| Error::Usage(format!("no predictions for video {}", s.video.id)))?;
        let scored: Vec<Scored> = p
            .segments
            .iter()
            .map(|q| {
                Segment::new(q.start_frame, q.end_frame).map(|segment| Scored {
                    segment,
                    score: q.score,
                })
            })
            .collect::<Result<_>>()?;
        let preds: Vec<Segment> = scored.iter().map(|q| q.segment).collect();
        if let Some(row) = VideoEval::compute(&s.video.id, &preds, &s.video.segments, &scored, config.tp_iou) {
            rows.push(row);
        }
    }
    Ok(EvalReport::from_videos(method, split, "none", rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub original: EvalReport,
    pub permuted: EvalReport,
    pub delta_jaccard: f64,
    pub delta_miou: f64,
}

/// Evaluates the decoder on `samples` and on their half-swapped versions.
pub fn permutation_experiment(model: &Model, config: &RunConfig, samples: &[&Sample], split: &str) -> Result<PermutationReport> {
    let swapped: Vec<Sample> = samples.iter().map(|s| permute_halves(s)).collect::<Result<_>>()?;
    let swapped_refs: Vec<&Sample> = swapped.iter().collect();
    let original = evaluate(Method::ProcnetsLstm, Some(model), config, samples, split)?;
    let permuted = evaluate(Method::ProcnetsLstm, Some(model), config, &swapped_refs, &format!("{split}-permuted"))?;
    Ok(PermutationReport {
        delta_jaccard: permuted.jaccard - original.jaccard,
        delta_miou: permuted.miou - original.miou,
        original,
        permuted,
    })
}

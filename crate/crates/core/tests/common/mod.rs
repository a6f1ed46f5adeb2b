//! Finite-difference gradient suite shared by the integration tests.

#![allow(dead_code)]

use procnets::anchors::{assign_training_samples, AnchorGrid, AssignmentConfig, Segment};
use procnets::decoder::{Ablation, Candidate, CandidateGrid, SequenceDecoder};
use procnets::encoder::{ContextEncoder, ContextFeatures, VideoFeatures};
use procnets::loss::{composite_loss, LossWeights};
use procnets::model::{ModelConfig, ProcNets};
use procnets::numerics::losses::{bce, bce_grad, smooth_l1, smooth_l1_grad, softmax_ce, softmax_ce_grad};
use procnets::numerics::{grad_check, softmax, Affine, Array2, BiLstm, GradReport, Lstm, ParamSlot, Parameterized, TemporalConv};
use procnets::proposal::{ProposalHead, ProposalMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

/// A layer plus inputs promoted to slots, so input gradients get checked too.
pub struct Probe<L> {
    pub layer: L,
    pub inputs: Vec<ParamSlot<f64>>,
}

impl<L: Parameterized<f64>> Parameterized<f64> for Probe<L> {
    fn slots(&self) -> Vec<&ParamSlot<f64>> {
        let mut v = self.layer.slots();
        v.extend(self.inputs.iter());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<f64>> {
        let mut v = self.layer.slots_mut();
        v.extend(self.inputs.iter_mut());
        v
    }
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_sum(a: &Array2<f64>, w: &Array2<f64>) -> f64 {
    dot(a.as_slice(), w.as_slice())
}

fn add_into(dst: &mut Array2<f64>, src: &[f64]) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src) {
        *d += s;
    }
}

fn dim(rng: &mut ChaCha8Rng, max: usize) -> usize {
    rng.random_range(1..=max)
}

pub fn check_affine(rng: &mut ChaCha8Rng) -> GradReport {
    let (i, o) = (dim(rng, 16), dim(rng, 16));
    let mut p = Probe {
        layer: Affine::new("affine", i, o, rng),
        inputs: vec![ParamSlot::new("affine.x", rand_matrix(rng, 1, i, -1.0, 1.0))],
    };
    let r = rand_vec(rng, o);
    grad_check(
        &mut p,
        |p| {
            let x = p.inputs[0].value.row(0).to_vec();
            let y = p.layer.forward(&x).unwrap();
            let dx = p.layer.backward(&x, &r);
            add_into(&mut p.inputs[0].grad, &dx);
            dot(&y, &r)
        },
        |p| dot(&p.layer.forward(p.inputs[0].value.row(0)).unwrap(), &r),
        STEP,
        None,
    )
}

/// Same as [`check_affine`] with the input gradient deliberately scaled.
pub fn check_corrupted_affine(rng: &mut ChaCha8Rng) -> GradReport {
    let mut p = Probe {
        layer: Affine::new("affine", 6, 5, rng),
        inputs: vec![ParamSlot::new("affine.x", rand_matrix(rng, 1, 6, -1.0, 1.0))],
    };
    let r = rand_vec(rng, 5);
    grad_check(
        &mut p,
        |p| {
            let x = p.inputs[0].value.row(0).to_vec();
            let y = p.layer.forward(&x).unwrap();
            let dx: Vec<f64> = p.layer.backward(&x, &r).iter().map(|v| v * 1.05).collect();
            add_into(&mut p.inputs[0].grad, &dx);
            dot(&y, &r)
        },
        |p| dot(&p.layer.forward(p.inputs[0].value.row(0)).unwrap(), &r),
        STEP,
        None,
    )
}

pub fn check_lstm_step(rng: &mut ChaCha8Rng) -> GradReport {
    let (d, h) = (dim(rng, 8), dim(rng, 8));
    let mut p = Probe {
        layer: Lstm::new("lstm", d, h, rng),
        inputs: vec![
            ParamSlot::new("lstm.x", rand_matrix(rng, 1, d, -1.0, 1.0)),
            ParamSlot::new("lstm.h_prev", rand_matrix(rng, 1, h, -0.9, 0.9)),
            ParamSlot::new("lstm.c_prev", rand_matrix(rng, 1, h, -1.0, 1.0)),
        ],
    };
    let (rh, rc) = (rand_vec(rng, h), rand_vec(rng, h));
    let loss = |p: &Probe<Lstm<f64>>| {
        let (h2, c2, _) = p
            .layer
            .step(p.inputs[0].value.row(0), p.inputs[1].value.row(0), p.inputs[2].value.row(0))
            .unwrap();
        dot(&h2, &rh) + dot(&c2, &rc)
    };
    grad_check(
        &mut p,
        |p| {
            let (x, hp, cp) = (
                p.inputs[0].value.row(0).to_vec(),
                p.inputs[1].value.row(0).to_vec(),
                p.inputs[2].value.row(0).to_vec(),
            );
            let (h2, c2, cache) = p.layer.step(&x, &hp, &cp).unwrap();
            let (dx, dh, dc) = p.layer.step_backward(&cache, &rh, &rc);
            add_into(&mut p.inputs[0].grad, &dx);
            add_into(&mut p.inputs[1].grad, &dh);
            add_into(&mut p.inputs[2].grad, &dc);
            dot(&h2, &rh) + dot(&c2, &rc)
        },
        loss,
        STEP,
        None,
    )
}

pub fn check_lstm_sequence(rng: &mut ChaCha8Rng) -> GradReport {
    let (steps, d, h) = (dim(rng, 8), dim(rng, 6), dim(rng, 6));
    let mut p = Probe {
        layer: Lstm::new("lstm", d, h, rng),
        inputs: vec![ParamSlot::new("lstm.xs", rand_matrix(rng, steps, d, -1.0, 1.0))],
    };
    let r: Vec<Vec<f64>> = (0..steps).map(|_| rand_vec(rng, h)).collect();
    let value = |trace_hidden: &[Vec<f64>]| trace_hidden.iter().zip(&r).map(|(a, b)| dot(a, b)).sum::<f64>();
    grad_check(
        &mut p,
        |p| {
            let xs = p.inputs[0].value.clone();
            let trace = p.layer.run((0..steps).map(|t| xs.row(t))).unwrap();
            let dxs = p.layer.run_backward(&trace, &r);
            add_into(&mut p.inputs[0].grad, &dxs.concat());
            value(&trace.hidden)
        },
        |p| {
            let xs = &p.inputs[0].value;
            value(&p.layer.run((0..steps).map(|t| xs.row(t))).unwrap().hidden)
        },
        STEP,
        None,
    )
}

pub fn check_bilstm(rng: &mut ChaCha8Rng) -> GradReport {
    let (steps, d, h) = (dim(rng, 10), dim(rng, 6), dim(rng, 6));
    let mut p = Probe {
        layer: BiLstm::new("bilstm", d, h, rng),
        inputs: vec![ParamSlot::new("bilstm.x", rand_matrix(rng, steps, d, -1.0, 1.0))],
    };
    let r = rand_matrix(rng, steps, 2 * h, -1.0, 1.0);
    grad_check(
        &mut p,
        |p| {
            let x = p.inputs[0].value.clone();
            let (out, trace) = p.layer.forward(&x).unwrap();
            let dx = p.layer.backward(&trace, &r);
            add_into(&mut p.inputs[0].grad, dx.as_slice());
            weighted_sum(&out, &r)
        },
        |p| weighted_sum(&p.layer.forward(&p.inputs[0].value).unwrap().0, &r),
        STEP,
        None,
    )
}

pub fn check_conv(rng: &mut ChaCha8Rng) -> GradReport {
    let (steps, c, o) = (dim(rng, 16), dim(rng, 8), dim(rng, 8));
    let k = [1, 3, 5, 7][rng.random_range(0..4)];
    let mut p = Probe {
        layer: TemporalConv::new("conv", k, c, o, rng).unwrap(),
        inputs: vec![ParamSlot::new("conv.x", rand_matrix(rng, steps, c, -1.0, 1.0))],
    };
    // non-zero bias so its gradient is exercised against a non-trivial value
    p.layer.bias.value = rand_matrix(rng, 1, o, -0.5, 0.5);
    let r = rand_matrix(rng, steps, o, -1.0, 1.0);
    grad_check(
        &mut p,
        |p| {
            let x = p.inputs[0].value.clone();
            let y = p.layer.forward(&x).unwrap();
            let dx = p.layer.backward(&x, &r);
            add_into(&mut p.inputs[0].grad, dx.as_slice());
            weighted_sum(&y, &r)
        },
        |p| weighted_sum(&p.layer.forward(&p.inputs[0].value).unwrap(), &r),
        STEP,
        None,
    )
}

pub fn check_encoder(rng: &mut ChaCha8Rng) -> GradReport {
    let (steps, d, h) = (dim(rng, 10), dim(rng, 6), dim(rng, 6));
    let mut enc = ContextEncoder::new(d, h, rng);
    let x = VideoFeatures::new(rand_matrix(rng, steps, d, -1.0, 1.0)).unwrap();
    let r = rand_matrix(rng, steps, d, -1.0, 1.0);
    grad_check(
        &mut enc,
        |e| {
            let (ctx, trace) = e.encode(&x).unwrap();
            e.backward(&trace, &r);
            weighted_sum(&ctx.matrix, &r)
        },
        |e| weighted_sum(&e.encode(&x).unwrap().0.matrix, &r),
        STEP,
        None,
    )
}

fn map_value(map: &ProposalMap<f64>, r: &[Array2<f64>; 3]) -> f64 {
    weighted_sum(&map.scores, &r[0]) + weighted_sum(&map.offsets_c, &r[1]) + weighted_sum(&map.offsets_l, &r[2])
}

pub fn check_proposal_head(rng: &mut ChaCha8Rng) -> GradReport {
    let (steps, d) = (dim(rng, 16), dim(rng, 6));
    let lengths: Vec<usize> = (0..dim(rng, 4)).map(|i| 1 + 2 * i).collect();
    let mut p = Probe {
        layer: ProposalHead::new(&lengths, d, rng).unwrap(),
        inputs: vec![ParamSlot::new("head.ctx", rand_matrix(rng, steps, d, -1.0, 1.0))],
    };
    let k = lengths.len();
    let r = [
        rand_matrix(rng, k, steps, -1.0, 1.0),
        rand_matrix(rng, k, steps, -1.0, 1.0),
        rand_matrix(rng, k, steps, -1.0, 1.0),
    ];
    grad_check(
        &mut p,
        |p| {
            let ctx = ContextFeatures {
                matrix: p.inputs[0].value.clone(),
            };
            let map = p.layer.propose(&ctx).unwrap();
            let dmap = ProposalMap {
                scores: r[0].clone(),
                offsets_c: r[1].clone(),
                offsets_l: r[2].clone(),
            };
            let dctx = p.layer.backward(&ctx, &map, &dmap);
            add_into(&mut p.inputs[0].grad, dctx.as_slice());
            map_value(&map, &r)
        },
        |p| {
            let ctx = ContextFeatures {
                matrix: p.inputs[0].value.clone(),
            };
            map_value(&p.layer.propose(&ctx).unwrap(), &r)
        },
        STEP,
        None,
    )
}

fn random_segment(rng: &mut ChaCha8Rng, frames: usize) -> Segment {
    let start = rng.random_range(0..frames - 1);
    let end = rng.random_range(start + 1..=frames);
    Segment { start, end }
}

/// Decoder recurrence, embedding, content projection and the proposal-vector
/// input, under teacher forcing with a cross-entropy objective.
pub fn check_decoder(rng: &mut ChaCha8Rng, ablation: Ablation) -> GradReport {
    let (frames, d, h) = (rng.random_range(6..=16), dim(rng, 6), dim(rng, 6));
    let (rows, cols) = (dim(rng, 3), dim(rng, 4));
    let m = rows * cols;
    let mut decoder = SequenceDecoder::new(m, d, h, rng);
    decoder.ablation = ablation;
    let segments: Vec<Segment> = (0..m).map(|_| random_segment(rng, frames)).collect();
    let mut p = Probe {
        layer: decoder,
        inputs: vec![ParamSlot::new("decoder.S", rand_matrix(rng, 1, m, 0.05, 0.95))],
    };
    let x = VideoFeatures::new(rand_matrix(rng, frames, d, -1.0, 1.0)).unwrap();
    let gts: Vec<Segment> = (0..rng.random_range(1..=3)).map(|_| random_segment(rng, frames)).collect();
    let grid = move |s: &ParamSlot<f64>| CandidateGrid {
        rows,
        cols,
        cells: segments
            .iter()
            .enumerate()
            .map(|(i, &segment)| Candidate {
                k: i % rows,
                t: i / rows,
                score: s.value.as_slice()[i],
                segment,
            })
            .collect(),
    };
    let grid2 = grid.clone();
    grad_check(
        &mut p,
        |p| {
            let g = grid(&p.inputs[0]);
            let tf = p.layer.teacher_forced(&g, &x, &gts).unwrap();
            let mut loss = 0.0;
            let dlogits: Vec<Vec<f64>> = tf
                .probs
                .iter()
                .zip(&tf.targets)
                .map(|(pr, &t)| {
                    loss -= pr[t].ln();
                    softmax_ce_grad(pr, t)
                })
                .collect();
            let ds = p.layer.backward(&tf, &dlogits);
            add_into(&mut p.inputs[0].grad, &ds);
            loss
        },
        |p| {
            let tf = p.layer.teacher_forced(&grid2(&p.inputs[0]), &x, &gts).unwrap();
            tf.probs.iter().zip(&tf.targets).map(|(pr, &t)| -pr[t].ln()).sum()
        },
        STEP,
        None,
    )
}

/// BCE, smooth-L1 and softmax cross-entropy, each against its gradient.
pub fn check_elementwise_losses(rng: &mut ChaCha8Rng) -> Vec<(&'static str, GradReport)> {
    let n = dim(rng, 16);
    let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let mut scores = ParamSlot::new("bce.score", rand_matrix(rng, 1, n, 0.02, 0.98));
    let bce_report = grad_check(
        &mut scores,
        |s| {
            let v = s.value.row(0).to_vec();
            for (i, (&x, &y)) in v.iter().zip(&labels).enumerate() {
                s.grad.add_at(0, i, bce_grad(x, y));
            }
            v.iter().zip(&labels).map(|(&x, &y)| bce(x, y)).sum()
        },
        |s| s.value.row(0).iter().zip(&labels).map(|(&x, &y)| bce(x, y)).sum(),
        STEP,
        None,
    );

    let target = rand_vec(rng, 2);
    let mut pred = ParamSlot::new("smooth_l1.pred", rand_matrix(rng, 1, 2, -2.5, 2.5));
    let sl1_report = grad_check(
        &mut pred,
        |s| {
            let v = s.value.row(0).to_vec();
            add_into(&mut s.grad, &smooth_l1_grad(&v, &target));
            smooth_l1(&v, &target)
        },
        |s| smooth_l1(s.value.row(0), &target),
        STEP,
        None,
    );

    let classes = dim(rng, 16) + 1;
    let t = rng.random_range(0..classes);
    let mut logits = ParamSlot::new("softmax_ce.logits", rand_matrix(rng, 1, classes, -3.0, 3.0));
    let ce_report = grad_check(
        &mut logits,
        |s| {
            let (l, probs) = softmax_ce(s.value.row(0), t).unwrap();
            add_into(&mut s.grad, &softmax_ce_grad(&probs, t));
            l
        },
        |s| softmax_ce(s.value.row(0), t).unwrap().0,
        STEP,
        None,
    );
    vec![("bce", bce_report), ("smooth_l1", sl1_report), ("softmax_ce", ce_report)]
}

/// The weighted three-term objective against the proposal map and the
/// decoder logits.
pub fn check_composite_loss(rng: &mut ChaCha8Rng) -> GradReport {
    let frames = rng.random_range(12..=16);
    let lengths = vec![3, 5];
    let anchors = AnchorGrid::new(lengths.clone(), frames);
    let gts = vec![Segment { start: 1, end: 4 }, Segment { start: frames - 5, end: frames }];
    let cfg = AssignmentConfig {
        samples: 4,
        ..AssignmentConfig::default()
    };
    let batch = assign_training_samples::<f64, _>(&anchors, &gts, &cfg, rng).unwrap();
    let (k, classes, steps) = (lengths.len(), rng.random_range(2..=9), gts.len() + 1);
    let targets: Vec<usize> = (0..steps).map(|_| rng.random_range(0..classes)).collect();
    let weights = LossWeights {
        alpha_r: 0.7,
        alpha_s: 1.3,
    };
    let mut slots = Probe {
        layer: ParamSlot::new("loss.scores", rand_matrix(rng, k, frames, 0.05, 0.95)),
        inputs: vec![
            ParamSlot::new("loss.offsets_c", rand_matrix(rng, k, frames, -0.9, 0.9)),
            ParamSlot::new("loss.offsets_l", rand_matrix(rng, k, frames, -0.9, 0.9)),
            ParamSlot::new("loss.logits", rand_matrix(rng, steps, classes, -2.0, 2.0)),
        ],
    };
    let eval = |p: &Probe<ParamSlot<f64>>| {
        let map = ProposalMap {
            scores: p.layer.value.clone(),
            offsets_c: p.inputs[0].value.clone(),
            offsets_l: p.inputs[1].value.clone(),
        };
        let probs: Vec<Vec<f64>> = (0..steps).map(|s| softmax(p.inputs[2].value.row(s))).collect();
        composite_loss(&map, &batch, &probs, &targets, &weights).unwrap()
    };
    grad_check(
        &mut slots,
        |p| {
            let (report, grads) = eval(p);
            add_into(&mut p.layer.grad, grads.dmap.scores.as_slice());
            add_into(&mut p.inputs[0].grad, grads.dmap.offsets_c.as_slice());
            add_into(&mut p.inputs[1].grad, grads.dmap.offsets_l.as_slice());
            add_into(&mut p.inputs[2].grad, &grads.dlogits.concat());
            report.total
        },
        |p| eval(p).0.total,
        STEP,
        None,
    )
}

pub fn small_model_config(ablation: Ablation) -> ModelConfig {
    ModelConfig {
        frames: 12,
        dim: 4,
        hidden: 3,
        anchor_lengths: vec![3, 5],
        pool_h: 1,
        pool_w: 3,
        ablation,
    }
}

/// End-to-end: encoder, head, pooling and decoder under the full objective.
pub fn check_full_model(rng: &mut ChaCha8Rng) -> GradReport {
    let mut model = ProcNets::new(small_model_config(Ablation::default()), rng).unwrap();
    let x = VideoFeatures::new(rand_matrix(rng, 12, 4, -1.0, 1.0)).unwrap();
    let gts = vec![Segment { start: 1, end: 4 }, Segment { start: 6, end: 11 }];
    let cfg = AssignmentConfig {
        samples: 6,
        ..AssignmentConfig::default()
    };
    let batch = assign_training_samples::<f64, _>(&model.anchors(), &gts, &cfg, rng).unwrap();
    let w = LossWeights::default();
    grad_check(
        &mut model,
        |m| m.forward_backward(&x, &gts, &batch, &w).unwrap().total,
        |m| m.loss(&x, &gts, &batch, &w).unwrap().total,
        STEP,
        None,
    )
}

/// `sum a_i w_i^2`, whose central difference is exact up to rounding.
pub fn check_quadratic(rng: &mut ChaCha8Rng) -> GradReport {
    let a = rand_matrix(rng, 4, 4, 0.5, 2.0);
    let mut w = ParamSlot::new("quadratic.w", rand_matrix(rng, 4, 4, -1.0, 1.0));
    let value = |w: &ParamSlot<f64>| w.value.as_slice().iter().zip(a.as_slice()).map(|(x, a)| a * x * x).sum();
    grad_check(
        &mut w,
        |w| {
            let g: Vec<f64> = w.value.as_slice().iter().zip(a.as_slice()).map(|(x, a)| 2.0 * a * x).collect();
            add_into(&mut w.grad, &g);
            value(w)
        },
        value,
        STEP,
        None,
    )
}

/// Every learned component on shapes drawn from `seed`.
pub fn gradient_suite(seed: u64) -> Vec<(String, GradReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(String, GradReport)> = vec![
        ("affine".into(), check_affine(&mut rng)),
        ("lstm_step".into(), check_lstm_step(&mut rng)),
        ("lstm_sequence".into(), check_lstm_sequence(&mut rng)),
        ("bilstm".into(), check_bilstm(&mut rng)),
        ("conv".into(), check_conv(&mut rng)),
        ("encoder".into(), check_encoder(&mut rng)),
        ("proposal_head".into(), check_proposal_head(&mut rng)),
        ("decoder".into(), check_decoder(&mut rng, Ablation::default())),
        ("composite_loss".into(), check_composite_loss(&mut rng)),
        ("full_model".into(), check_full_model(&mut rng)),
    ];
    out.extend(
        check_elementwise_losses(&mut rng)
            .into_iter()
            .map(|(n, r)| (n.to_string(), r)),
    );
    out
}

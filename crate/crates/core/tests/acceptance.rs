//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use procnets::anchors::{
    assign_training_samples, build_anchor_lengths, decode_continuous, decode_segment, encode_offsets, Anchor,
    AnchorGrid, AssignmentConfig, Segment,
};
use procnets::dataio::{synth_generate, Dataset, Split, SynthConfig};
use procnets::decoder::{build_candidate_grid, grid_size, Scored, SequenceDecoder};
use procnets::encoder::{ContextFeatures, VideoFeatures};
use procnets::loss::{composite_loss, LossWeights};
use procnets::metrics::{jaccard_score, miou_score, prf_at_iou};
use procnets::numerics::Array2;
use procnets::pipeline::cli::run_with;
use procnets::pipeline::{
    ablation_study, evaluate, permutation_experiment, train, Method, RunConfig, Trainer,
};
use procnets::proposal::ProposalHead;
use procnets::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const CODEC_TOL: f64 = 1e-9;
const METRIC_TOL: f64 = 1e-12;
const ANALYTIC_TOL: f64 = 1e-6;
const OVERFIT_JACCARD: f64 = 90.0;
const OVERFIT_BUDGET: Duration = Duration::from_secs(120);
const DESK_BUDGET: Duration = Duration::from_secs(30 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_gradients() -> Outcome {
    let t0 = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for seed in 0..5 {
        for (name, report) in common::gradient_suite(seed) {
            count += 1;
            let e = report.max_rel_error();
            if e.is_nan() || e > worst.0 {
                worst = (e, format!("{name}/seed{seed}"));
            }
        }
    }
    let elapsed = t0.elapsed();
    outcome(
        worst.0 <= GRAD_TOL && elapsed < GRAD_BUDGET,
        format!(
            "{count} checks, max rel error {:.2e} ({}) <= {GRAD_TOL:e}, {:.1}s < 60s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let frames = 500;
    let lengths = build_anchor_lengths(3, 8, 16).unwrap();
    let (mut cont, mut rounded) = (0.0f64, 0usize);
    for _ in 0..10_000 {
        let anchor = Anchor::at_frame(rng.random_range(0..frames), lengths[rng.random_range(0..lengths.len())]);
        let start = rng.random_range(0..frames - 1);
        let gt = Segment {
            start,
            end: rng.random_range(start + 1..=frames),
        };
        let off = encode_offsets::<f64>(&anchor, &gt);
        let (c, l) = decode_continuous(&anchor, &off);
        let (s, e) = (c - l / 2.0, c + l / 2.0);
        cont = cont.max((s - gt.start as f64).abs()).max((e - gt.end as f64).abs());
        let seg = decode_segment(&anchor, &off, frames);
        rounded = rounded.max(seg.start.abs_diff(gt.start)).max(seg.end.abs_diff(gt.end));
    }
    outcome(
        cont <= CODEC_TOL && rounded <= 1,
        format!("10000 pairs, continuous max error {cont:.1e} <= 1e-9, rounded max {rounded} frame(s) <= 1"),
    )
}

fn c3_config() -> Outcome {
    let lengths = build_anchor_lengths(3, 8, 16).unwrap();
    let expected: Vec<usize> = (0..16).map(|i| 3 + 8 * i).collect();
    let m = grid_size(16, 500, 8, 4);
    let from_defaults = RunConfig::default().model_config().unwrap().num_candidates();
    outcome(
        lengths == expected && m == 250 && from_defaults == 250,
        format!(
            "K={} lengths {}..={}, proposal vector length {m} (defaults give {from_defaults})",
            lengths.len(),
            lengths[0],
            lengths[15]
        ),
    )
}

/// Intersection by counting shared frames.
fn frames_shared(a: &Segment, b: &Segment) -> usize {
    (a.start..a.end).filter(|f| (b.start..b.end).contains(f)).count()
}

fn brute_iou(a: &Segment, b: &Segment) -> f64 {
    let i = frames_shared(a, b);
    let u = (a.start.min(b.start)..a.end.max(b.end))
        .filter(|f| (a.start..a.end).contains(f) || (b.start..b.end).contains(f))
        .count();
    i as f64 / u as f64
}

fn brute_prf(preds: &[Scored], gts: &[Segment], tiou: f64) -> (f64, f64, f64) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    // selection sort by descending score, earlier index first on ties
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if preds[order[j]].score > preds[order[i]].score {
                order.swap(i, j);
            }
        }
    }
    let mut used = vec![false; gts.len()];
    let mut tp = 0.0;
    for &p in &order {
        let mut pick = None;
        let mut best = -1.0;
        for g in 0..gts.len() {
            let v = brute_iou(&preds[p].segment, &gts[g]);
            if !used[g] && v >= tiou && v > best {
                best = v;
                pick = Some(g);
            }
        }
        if let Some(g) = pick {
            used[g] = true;
            tp += 1.0;
        }
    }
    let r = if gts.is_empty() { 0.0 } else { tp / gts.len() as f64 };
    let p = if preds.is_empty() { 0.0 } else { tp / preds.len() as f64 };
    let f = if r + p > 0.0 { 2.0 * r * p / (r + p) } else { 0.0 };
    (r, p, f)
}

fn c4_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut order_ok) = (0.0f64, true);
    for _ in 0..1000 {
        let frames = rng.random_range(2..=80);
        let seg = |rng: &mut ChaCha8Rng| {
            let s = rng.random_range(0..frames - 1);
            Segment {
                start: s,
                end: rng.random_range(s + 1..=frames),
            }
        };
        let gts: Vec<Segment> = (0..rng.random_range(1..=8)).map(|_| seg(&mut rng)).collect();
        let preds: Vec<Scored> = (0..rng.random_range(1..=8))
            .map(|_| Scored {
                segment: seg(&mut rng),
                score: rng.random(),
            })
            .collect();
        let plain: Vec<Segment> = preds.iter().map(|p| p.segment).collect();

        let n = gts.len() as f64;
        let oracle_j: f64 = gts
            .iter()
            .map(|g| plain.iter().map(|p| frames_shared(g, p) as f64 / p.length() as f64).fold(0.0, f64::max))
            .sum::<f64>()
            / n;
        let oracle_m: f64 = gts.iter().map(|g| plain.iter().map(|p| brute_iou(g, p)).fold(0.0, f64::max)).sum::<f64>() / n;
        let j = jaccard_score(&plain, &gts).unwrap();
        let m = miou_score(&plain, &gts).unwrap();
        let tiou = [0.3, 0.5, 0.7][rng.random_range(0..3)];
        let prf = prf_at_iou(&preds, &gts, tiou);
        let (r, p, f) = brute_prf(&preds, &gts, tiou);
        for e in [j - oracle_j, m - oracle_m, prf.recall - r, prf.precision - p, prf.f1 - f] {
            worst = worst.max(e.abs());
        }
        order_ok &= j >= m;
    }
    outcome(
        worst <= METRIC_TOL && order_ok,
        format!("1000 instances, max deviation from oracle {worst:.1e} <= 1e-12, jaccard >= miou everywhere: {order_ok}"),
    )
}

fn c5_analytic() -> Outcome {
    let frames = 500;
    let lengths = build_anchor_lengths(3, 8, 16).unwrap();
    let anchors = AnchorGrid::new(lengths.clone(), frames);
    let head = ProposalHead::<f64>::zeros(&lengths, 4).unwrap();
    let ctx = ContextFeatures {
        matrix: Array2::from_fn(frames, 4, |t, d| ((t * 7 + d) % 5) as f64 - 2.0),
    };
    let map = head.propose(&ctx).unwrap();
    let grid = build_candidate_grid(&map, 8, 4, &anchors).unwrap();
    let decoder = SequenceDecoder::<f64>::zeros(250, 4, 8);
    let x = VideoFeatures::new(ctx.matrix.clone()).unwrap();
    let gts = vec![Segment { start: 20, end: 60 }, Segment { start: 200, end: 280 }];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = assign_training_samples::<f64, _>(&anchors, &gts, &AssignmentConfig::default(), &mut rng).unwrap();
    let tf = decoder.teacher_forced(&grid, &x, &gts).unwrap();
    let (report, _) = composite_loss(&map, &batch, &tf.probs, &tf.targets, &LossWeights::default()).unwrap();
    let cla_err = (report.l_cla - 2f64.ln()).abs();
    let seq_err = (report.l_seq - 251f64.ln()).abs();
    outcome(
        cla_err <= ANALYTIC_TOL && seq_err <= ANALYTIC_TOL && grid.len() == 250,
        format!(
            "l_cla {:.9} vs ln 2 (err {cla_err:.1e}), l_seq {:.9} vs ln 251 (err {seq_err:.1e})",
            report.l_cla, report.l_seq
        ),
    )
}

fn c6_overfit() -> Outcome {
    let t0 = Instant::now();
    let data = synth_generate(SynthConfig {
        num_train: 1,
        num_val: 0,
        num_test: 0,
        ..SynthConfig::desk()
    })
    .unwrap();
    let sample = &data[0];
    let cfg = RunConfig::desk();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    let mut first = None;
    let mut last = 0.0;
    for _ in 0..500 {
        last = trainer.step(sample).unwrap().total;
        first.get_or_insert(last);
    }
    let report = evaluate(Method::ProcnetsLstm, Some(&trainer.model), &cfg, &[sample], "train").unwrap();
    let elapsed = t0.elapsed();
    let first = first.unwrap();
    outcome(
        report.jaccard >= OVERFIT_JACCARD && last < 0.1 * first && elapsed < OVERFIT_BUDGET,
        format!(
            "500 steps, jaccard {:.2} >= 90, loss {first:.3} -> {last:.4}, {:.1}s < 120s",
            report.jaccard,
            elapsed.as_secs_f64()
        ),
    )
}

struct Desk {
    data: Dataset,
    config: RunConfig,
    model: Model,
}

fn c7_desk(desk: &mut Option<Desk>) -> Outcome {
    let t0 = Instant::now();
    let data = Dataset::new(synth_generate(SynthConfig::desk()).unwrap());
    let cfg = RunConfig::desk();
    let out = train(&cfg, &data).unwrap();
    let elapsed = t0.elapsed();
    let test = data.split(Split::Test);
    let lstm = evaluate(Method::ProcnetsLstm, Some(&out.best.model), &cfg, &test, "test").unwrap();
    let uniform = evaluate(Method::Uniform, None, &cfg, &test, "test").unwrap();
    let untrained = Trainer::new(cfg.clone()).unwrap().model;
    let control = evaluate(Method::ProcnetsLstm, Some(&untrained), &cfg, &test, "test").unwrap();
    let pass = lstm.jaccard > uniform.jaccard
        && lstm.jaccard > control.jaccard
        && lstm.miou > uniform.miou
        && lstm.miou > control.miou
        && elapsed < DESK_BUDGET;
    let detail = format!(
        "test jaccard/miou: lstm {:.2}/{:.2}, uniform {:.2}/{:.2}, untrained {:.2}/{:.2}; {} epochs in {:.1}s",
        lstm.jaccard,
        lstm.miou,
        uniform.jaccard,
        uniform.miou,
        control.jaccard,
        control.miou,
        cfg.epochs,
        elapsed.as_secs_f64()
    );
    *desk = Some(Desk {
        data,
        config: cfg,
        model: out.best.model,
    });
    outcome(pass, detail)
}

fn c8_ablations() -> Outcome {
    let data = Dataset::new(synth_generate(SynthConfig::desk()).unwrap());
    let reports = ablation_study(&RunConfig::desk(), &data, Split::Test).unwrap();
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.2}/{:.2}", r.ablation, r.jaccard, r.miou))
        .collect();
    outcome(
        reports.len() == 3 && reports.iter().all(|r| r.num_videos > 0),
        format!("{} reports: {}", reports.len(), summary.join(", ")),
    )
}

fn c9_permutation(desk: &Option<Desk>) -> Outcome {
    let Some(d) = desk else {
        return outcome(false, "no trained model (criterion 7 did not finish)".into());
    };
    let r = permutation_experiment(&d.model, &d.config, &d.data.split(Split::Test), "test").unwrap();
    outcome(
        r.permuted.jaccard < r.original.jaccard,
        format!(
            "original jaccard {:.2}, permuted {:.2} (miou {:.2} -> {:.2})",
            r.original.jaccard, r.permuted.jaccard, r.original.miou, r.permuted.miou
        ),
    )
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let synth = SynthConfig {
        num_train: 40,
        num_val: 10,
        num_test: 10,
        ..SynthConfig::desk()
    };
    let cfg = RunConfig {
        epochs: 3,
        ..RunConfig::desk()
    };
    std::fs::write(root.join("synth.json"), serde_json::to_string(&synth).unwrap()).unwrap();
    std::fs::write(root.join("run.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let cli = |args: Vec<String>| {
        let mut sink = Vec::new();
        run_with(std::iter::once("procnets".to_string()).chain(args), &mut sink)
    };
    let mut codes = vec![cli(vec!["gen-data".into(), "--config".into(), s(&root.join("synth.json")), "--out".into(), s(&root.join("data"))])];
    for run in ["a", "b"] {
        let dir = root.join(run);
        codes.push(cli(vec![
            "train".into(),
            "--config".into(),
            s(&root.join("run.json")),
            "--data".into(),
            s(&root.join("data")),
            "--out".into(),
            s(&dir),
        ]));
        codes.push(cli(vec![
            "eval".into(),
            "--checkpoint".into(),
            s(&dir.join("checkpoint.json")),
            "--data".into(),
            s(&root.join("data")),
            "--out".into(),
            s(&dir.join("eval")),
        ]));
    }
    let read = |p: std::path::PathBuf| std::fs::read(p).unwrap_or_default();
    let same_train = read(root.join("a/report.json")) == read(root.join("b/report.json"));
    let same_eval = read(root.join("a/eval/report.json")) == read(root.join("b/eval/report.json"));
    let same_ckpt = read(root.join("a/checkpoint.json")) == read(root.join("b/checkpoint.json"));
    let nonempty = !read(root.join("a/eval/report.json")).is_empty();
    outcome(
        codes.iter().all(|&c| c == 0) && same_train && same_eval && same_ckpt && nonempty,
        format!("exit codes {codes:?}; identical train report {same_train}, eval report {same_eval}, checkpoint {same_ckpt}"),
    )
}

type Criterion = Box<dyn FnOnce(&mut Option<Desk>) -> Outcome>;

fn main() {
    let mut desk = None;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("gradient suite", Box::new(|_| c1_gradients())),
        ("offset codec", Box::new(|_| c2_codec())),
        ("configuration fidelity", Box::new(|_| c3_config())),
        ("metric oracle", Box::new(|_| c4_metrics())),
        ("analytic initial losses", Box::new(|_| c5_analytic())),
        ("single-video overfit", Box::new(|_| c6_overfit())),
        ("desk-scale experiment", Box::new(c7_desk)),
        ("ablation harness", Box::new(|_| c8_ablations())),
        ("permutation direction", Box::new(|d: &mut Option<Desk>| c9_permutation(d))),
        ("determinism", Box::new(|_| c10_determinism())),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut desk)))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{nearest_candidate, CandidateGrid};
use crate::anchors::Segment;
use crate::encoder::VideoFeatures;
use crate::error::{Error, Result};
use crate::numerics::{softmax, Affine, Lstm, LstmTrace, ParamSlot, Parameterized};
use crate::scalar::Scalar;

/// Which third of the decoder input is forced to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    #[serde(default)]
    pub drop_proposal_vec: bool,
    #[serde(default)]
    pub drop_location_emb: bool,
    #[serde(default)]
    pub drop_segment_content: bool,
}

impl Ablation {
    pub fn is_none(&self) -> bool {
        !(self.drop_proposal_vec || self.drop_location_emb || self.drop_segment_content)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.drop_proposal_vec {
            parts.push("-proposal_vec");
        }
        if self.drop_location_emb {
            parts.push("-location_emb");
        }
        if self.drop_segment_content {
            parts.push("-segment_content");
        }
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join(",")
        }
    }
}

/// Previous-segment token fed to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    Start,
    Candidate(usize),
}

/// Mean of the frame rows in `[seg.start, seg.end)`.
pub fn mean_pool<T: Scalar>(x: &VideoFeatures<T>, seg: &Segment) -> Result<Vec<T>> {
    if seg.start >= seg.end || seg.end > x.frames() {
        return Err(Error::Config(format!(
            "segment {seg} is empty or outside a {}-frame video",
            x.frames()
        )));
    }
    let mut acc = vec![T::zero(); x.dim()];
    for t in seg.start..seg.end {
        for (a, &v) in acc.iter_mut().zip(x.matrix().row(t)) {
            *a += v;
        }
    }
    let n = T::of_usize(seg.length());
    Ok(acc.into_iter().map(|v| v / n).collect())
}

/// The tuple `(S, B, C)` consumed at one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderInput<T> {
    pub proposal_vector: Vec<T>,
    pub location_embedding: Vec<T>,
    pub segment_content: Vec<T>,
}

impl<T: Scalar> DecoderInput<T> {
    /// `[S; B; C]` with ablated parts zeroed.
    pub fn concat(&self, ablation: &Ablation) -> Vec<T> {
        let mut out = Vec::with_capacity(3 * self.proposal_vector.len());
        let mut push = |part: &[T], drop: bool| {
            if drop {
                out.extend(std::iter::repeat_n(T::zero(), part.len()));
            } else {
                out.extend_from_slice(part);
            }
        };
        push(&self.proposal_vector, ablation.drop_proposal_vec);
        push(&self.location_embedding, ablation.drop_location_emb);
        push(&self.segment_content, ablation.drop_segment_content);
        out
    }
}

/// Segment-level recurrent decoder over the `M` pooled candidates.
///
/// Output classes are the `M` candidates plus an end token at index `M`.
/// The embedding matrix has `M + 1` rows; row `M` embeds the start token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SequenceDecoder<T> {
    pub embedding: ParamSlot<T>,
    pub content: Affine<T>,
    pub lstm: Lstm<T>,
    pub output: Affine<T>,
    pub ablation: Ablation,
}

/// Forward record of a teacher-forced pass.
#[derive(Debug, Clone)]
pub struct TeacherForced<T> {
    /// `P_1 .. P_{N+1}`.
    pub probs: Vec<Vec<T>>,
    /// Candidate index per ground-truth segment, then the end token.
    pub targets: Vec<usize>,
    tokens: Vec<Token>,
    pooled: Vec<Vec<T>>,
    inputs: Vec<Vec<T>>,
    trace: LstmTrace<T>,
}

/// One emitted segment from inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub index: usize,
    pub segment: Segment,
    /// Probability of this choice at its step.
    pub prob: f64,
}

impl<T: Scalar> SequenceDecoder<T> {
    pub fn new<R: Rng + ?Sized>(candidates: usize, dim: usize, hidden: usize, rng: &mut R) -> Self {
        let m = candidates;
        Self {
            embedding: ParamSlot::uniform("decoder.embedding", m + 1, m, m + 1, rng),
            content: Affine::new("decoder.content", dim, m, rng),
            lstm: Lstm::new("decoder.lstm", 3 * m, hidden, rng),
            output: Affine::new("decoder.output", hidden, m + 1, rng),
            ablation: Ablation::default(),
        }
    }

    pub fn zeros(candidates: usize, dim: usize, hidden: usize) -> Self {
        let m = candidates;
        Self {
            embedding: ParamSlot::zeros("decoder.embedding", m + 1, m),
            content: Affine::zeros("decoder.content", dim, m),
            lstm: Lstm::zeros("decoder.lstm", 3 * m, hidden),
            output: Affine::zeros("decoder.output", hidden, m + 1),
            ablation: Ablation::default(),
        }
    }

    /// `M`, the proposal-vector length.
    pub fn candidates(&self) -> usize {
        self.embedding.value.cols()
    }

    pub fn end_token(&self) -> usize {
        self.candidates()
    }

    pub fn location_embedding(&self, token: Token) -> Result<Vec<T>> {
        let m = self.candidates();
        let row = match token {
            Token::Start => m,
            Token::Candidate(i) if i < m => i,
            Token::Candidate(i) => return Err(Error::OutOfRange { index: i, limit: m }),
        };
        Ok(self.embedding.value.row(row).to_vec())
    }

    /// Mean-pooled raw features of `seg`, reduced to length `M`.
    pub fn segment_content(&self, x: &VideoFeatures<T>, seg: &Segment) -> Result<Vec<T>> {
        self.content.forward(&mean_pool(x, seg)?)
    }

    fn check_grid(&self, grid: &CandidateGrid<T>) -> Result<()> {
        if grid.len() != self.candidates() {
            return Err(Error::Config(format!(
                "decoder built for {} candidates, grid has {}",
                self.candidates(),
                grid.len()
            )));
        }
        Ok(())
    }

    fn input(&self, s: &[T], token: Token, content: Vec<T>) -> Result<Vec<T>> {
        Ok(DecoderInput {
            proposal_vector: s.to_vec(),
            location_embedding: self.location_embedding(token)?,
            segment_content: content,
        }
        .concat(&self.ablation))
    }

    /// Runs the decoder over ground-truth segments (sorted by start here).
    /// Step 1 consumes the start token and whole-video content; step `t > 1`
    /// consumes ground-truth segment `t - 1`.
    pub fn teacher_forced(
        &self,
        grid: &CandidateGrid<T>,
        x: &VideoFeatures<T>,
        gts: &[Segment],
    ) -> Result<TeacherForced<T>> {
        self.check_grid(grid)?;
        if gts.is_empty() {
            return Err(Error::EmptyInput("teacher forcing needs at least one segment"));
        }
        let mut sorted = gts.to_vec();
        sorted.sort();
        let mut targets: Vec<usize> = sorted.iter().map(|g| nearest_candidate(g, grid)).collect();

        let s = grid.proposal_vector();
        let whole = Segment::new(0, x.frames())?;
        let mut tokens = vec![Token::Start];
        let mut pooled = vec![mean_pool(x, &whole)?];
        for (g, &m) in sorted.iter().zip(&targets) {
            tokens.push(Token::Candidate(m));
            pooled.push(mean_pool(x, g)?);
        }
        let inputs = tokens
            .iter()
            .zip(&pooled)
            .map(|(&tok, p)| self.input(&s, tok, self.content.forward(p)?))
            .collect::<Result<Vec<_>>>()?;
        let trace = self.lstm.run(inputs.iter().map(Vec::as_slice))?;
        let probs = trace
            .hidden
            .iter()
            .map(|h| Ok(softmax(&self.output.forward(h)?)))
            .collect::<Result<Vec<_>>>()?;
        targets.push(self.end_token());
        Ok(TeacherForced {
            probs,
            targets,
            tokens,
            pooled,
            inputs,
            trace,
        })
    }

    /// Backpropagates per-step `dL/dlogits`; returns `dL/dS`.
    pub fn backward(&mut self, tf: &TeacherForced<T>, dlogits: &[Vec<T>]) -> Vec<T> {
        let m = self.candidates();
        let dh: Vec<Vec<T>> = tf
            .trace
            .hidden
            .iter()
            .zip(dlogits)
            .map(|(h, d)| self.output.backward(h, d))
            .collect();
        let dxs = self.lstm.run_backward(&tf.trace, &dh);
        let mut ds = vec![T::zero(); m];
        for (t, dx) in dxs.iter().enumerate() {
            if !self.ablation.drop_proposal_vec {
                for (a, &b) in ds.iter_mut().zip(&dx[..m]) {
                    *a += b;
                }
            }
            if !self.ablation.drop_location_emb {
                let row = match tf.tokens[t] {
                    Token::Start => m,
                    Token::Candidate(i) => i,
                };
                for (a, &b) in self.embedding.grad.row_mut(row).iter_mut().zip(&dx[m..2 * m]) {
                    *a += b;
                }
            }
            if !self.ablation.drop_segment_content {
                self.content.backward(&tf.pooled[t], &dx[2 * m..]);
            }
        }
        debug_assert_eq!(tf.inputs.len(), dxs.len());
        ds
    }

    /// Beam search over candidate sequences. A hypothesis ends when it emits
    /// the end token or after `max_segments` emissions; already-emitted
    /// candidates are masked. Returns the best hypothesis' emissions in order.
    pub fn decode(
        &self,
        grid: &CandidateGrid<T>,
        x: &VideoFeatures<T>,
        beam_size: usize,
        max_segments: usize,
    ) -> Result<Vec<Emission>> {
        self.check_grid(grid)?;
        if beam_size == 0 || max_segments == 0 {
            return Err(Error::Config("beam size and segment cap must be at least 1".into()));
        }
        let m = self.candidates();
        let end = self.end_token();
        let s = grid.proposal_vector();
        let hidden = self.lstm.hidden();
        let whole = Segment::new(0, x.frames())?;

        let mut content_cache: Vec<Option<Vec<T>>> = vec![None; m];
        let start = Hyp {
            emitted: Vec::new(),
            log_prob: 0.0,
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
            token: Token::Start,
            content: self.segment_content(x, &whole)?,
        };
        let mut alive = vec![start];
        let mut completed: Vec<Hyp<T>> = Vec::new();

        for step in 0..=max_segments {
            if alive.is_empty() {
                break;
            }
            if step == max_segments {
                completed.append(&mut alive);
                break;
            }
            let mut exts: Vec<Ext<T>> = Vec::new();
            for (hi, hyp) in alive.iter().enumerate() {
                let input = self.input(&s, hyp.token, hyp.content.clone())?;
                let (h, c, _) = self.lstm.step(&input, &hyp.h, &hyp.c)?;
                let mut logits = self.output.forward(&h)?;
                for e in &hyp.emitted {
                    logits[e.index] = T::neg_infinity();
                }
                let probs = softmax(&logits);
                for (class, p) in probs.iter().enumerate() {
                    let p = p.as_f64();
                    if p > 0.0 {
                        exts.push(Ext {
                            score: hyp.log_prob + p.ln(),
                            parent: hi,
                            class,
                            prob: p,
                            h: h.clone(),
                            c: c.clone(),
                        });
                    }
                }
            }
            exts.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(Ordering::Equal)
                    .then(a.parent.cmp(&b.parent))
                    .then(a.class.cmp(&b.class))
            });
            exts.truncate(beam_size);

            let mut next = Vec::new();
            for ext in exts {
                let parent = &alive[ext.parent];
                let mut emitted = parent.emitted.clone();
                if ext.class == end {
                    completed.push(Hyp {
                        emitted,
                        log_prob: ext.score,
                        h: ext.h,
                        c: ext.c,
                        token: parent.token,
                        content: Vec::new(),
                    });
                    continue;
                }
                let segment = grid.segment(ext.class);
                emitted.push(Emission {
                    index: ext.class,
                    segment,
                    prob: ext.prob,
                });
                let content = match &content_cache[ext.class] {
                    Some(v) => v.clone(),
                    None => {
                        let v = self.segment_content(x, &segment)?;
                        content_cache[ext.class] = Some(v.clone());
                        v
                    }
                };
                next.push(Hyp {
                    emitted,
                    log_prob: ext.score,
                    h: ext.h,
                    c: ext.c,
                    token: Token::Candidate(ext.class),
                    content,
                });
            }
            alive = next;
            let best_done = completed.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            let best_alive = alive.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if completed.len() >= beam_size && best_done >= best_alive {
                break;
            }
        }

        let mut best: Option<Hyp<T>> = None;
        for hyp in completed {
            if best.as_ref().is_none_or(|b| hyp.log_prob > b.log_prob) {
                best = Some(hyp);
            }
        }
        Ok(best.map(|h| h.emitted).unwrap_or_default())
    }
}

struct Hyp<T> {
    emitted: Vec<Emission>,
    log_prob: f64,
    h: Vec<T>,
    c: Vec<T>,
    token: Token,
    content: Vec<T>,
}

struct Ext<T> {
    score: f64,
    parent: usize,
    class: usize,
    prob: f64,
    h: Vec<T>,
    c: Vec<T>,
}

impl<T: Scalar> Parameterized<T> for SequenceDecoder<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        let mut v = vec![&self.embedding];
        v.extend(self.content.slots());
        v.extend(self.lstm.slots());
        v.extend(self.output.slots());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        let mut v = vec![&mut self.embedding];
        v.extend(self.content.slots_mut());
        v.extend(self.lstm.slots_mut());
        v.extend(self.output.slots_mut());
        v
    }
}

//! Span reader: bilinear start/end scores between document encodings and a
//! self-attended question summary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{QaExample, TokenSpan};
use crate::embed::EmbeddingTable;
use crate::encoder::{
    backward_document, backward_question, encode_document, encode_question, projection_grad, EncoderParams,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::neural::dropout::Mode;
use crate::neural::linalg::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc};
use crate::neural::ops::{cross_entropy_with_grad, softmax, softmax_backward};
use crate::neural::params::{join_name, load_named, zeros_like, Parameters};
use crate::neural::{Hyperparams, NamedTensor, Tensor};
use crate::policy::{merge_selected, MergedContext};
use crate::rng::SplitMix64;
use crate::selector::{find, SentenceReader};
use crate::train::{train, Contribution, TrainHistory};

pub const DEFAULT_MAX_ANSWER_LEN: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct ReaderParams {
    pub encoder: EncoderParams,
    /// `h`
    pub w1: Tensor,
    /// `h × h`
    pub w_start: Tensor,
    /// `h × h`
    pub w_end: Tensor,
}

pub const PREFIX: &str = "reader";

impl Parameters for ReaderParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.encoder.visit(&join_name(prefix, "encoder"), f);
        f(join_name(prefix, "w1"), &self.w1);
        f(join_name(prefix, "W_start"), &self.w_start);
        f(join_name(prefix, "W_end"), &self.w_end);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.encoder.visit_mut(&join_name(prefix, "encoder"), f);
        f(join_name(prefix, "w1"), &mut self.w1);
        f(join_name(prefix, "W_start"), &mut self.w_start);
        f(join_name(prefix, "W_end"), &mut self.w_end);
    }
}

impl ReaderParams {
    pub fn new(h_d: usize, h: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, 0x5245_4144);
        let encoder = EncoderParams::new(h_d, h, &mut rng);
        let bound = 1.0 / (h as f64).sqrt();
        Self {
            w1: Tensor::uniform(&[h], bound, &mut rng),
            w_start: Tensor::uniform(&[h, h], bound, &mut rng),
            w_end: Tensor::uniform(&[h, h], bound, &mut rng),
            encoder,
        }
    }

    pub fn h(&self) -> usize {
        self.encoder.h()
    }

    pub fn from_named(tensors: &[NamedTensor]) -> Result<Self> {
        let w1 = find(tensors, "reader.encoder.W1")?;
        let ws = find(tensors, "reader.W_start")?;
        let mut p = Self::new(w1.rows(), ws.rows(), 0);
        load_named(&mut p, PREFIX, tensors)?;
        Ok(p)
    }
}

struct Decoded {
    beta: Vec<f64>,
    q_tilde: Vec<f64>,
    u_start: Vec<f64>,
    u_end: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
}

fn decode(d_enc: &Tensor, q_enc: &Tensor, p: &ReaderParams) -> Decoded {
    let h = p.h();
    let scores: Vec<f64> = (0..q_enc.rows()).map(|j| dot(p.w1.data(), q_enc.row(j))).collect();
    let beta = softmax(&scores);
    let mut q_tilde = vec![0.0; h];
    for (j, b) in beta.iter().enumerate() {
        axpy(*b, q_enc.row(j), &mut q_tilde);
    }
    let mut u_start = vec![0.0; h];
    matvec_acc(p.w_start.data(), &q_tilde, &mut u_start);
    let mut u_end = vec![0.0; h];
    matvec_acc(p.w_end.data(), &q_tilde, &mut u_end);
    let start = (0..d_enc.rows()).map(|i| dot(d_enc.row(i), &u_start)).collect();
    let end = (0..d_enc.rows()).map(|i| dot(d_enc.row(i), &u_end)).collect();
    Decoded {
        beta,
        q_tilde,
        u_start,
        u_end,
        start,
        end,
    }
}

/// Start and end scores for every document position.
pub fn decode_scores(d_enc: &Tensor, q_enc: &Tensor, p: &ReaderParams) -> (Vec<f64>, Vec<f64>) {
    let d = decode(d_enc, q_enc, p);
    (d.start, d.end)
}

/// Best `(start, end)` with `start <= end < start + max_len` by
/// `start_scores[s] + end_scores[e]`; ties go to the smallest start, then
/// the smallest end.
pub fn predict_span(start_scores: &[f64], end_scores: &[f64], max_len: usize) -> (usize, usize) {
    assert!(!start_scores.is_empty() && start_scores.len() == end_scores.len() && max_len >= 1);
    let n = start_scores.len();
    let mut best = (0, 0);
    let mut best_score = f64::NEG_INFINITY;
    for s in 0..n {
        for e in s..n.min(s + max_len) {
            let v = start_scores[s] + end_scores[e];
            if v > best_score {
                best_score = v;
                best = (s, e);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    /// Inclusive document token range.
    pub start: usize,
    pub end: usize,
    pub text: String,
    /// Scores over the reader's input positions.
    pub start_scores: Vec<f64>,
    pub end_scores: Vec<f64>,
}

/// One reader training instance in input coordinates.
#[derive(Debug, Clone)]
pub struct ReaderInput {
    pub document: Tensor,
    pub question: Tensor,
    /// Inclusive gold span within `document`.
    pub gold: Option<(usize, usize)>,
}

pub fn example_loss(p: &ReaderParams, input: &ReaderInput, mode: &mut Mode<'_>) -> Option<Contribution<ReaderParams>> {
    let (gs, ge) = input.gold?;
    let h = p.h();
    let q = encode_question(&input.question, &p.encoder, mode);
    let doc = encode_document(&input.document, &q, &p.encoder, mode);
    let dec = decode(&doc.d_enc, &q.q_enc, p);
    let (ls, gstart) = cross_entropy_with_grad(&dec.start, gs);
    let (le, gend) = cross_entropy_with_grad(&dec.end, ge);

    let mut grads = zeros_like(p);
    let mut d_denc = doc.d_enc.zeros_like();
    let mut d_us = vec![0.0; h];
    let mut d_ue = vec![0.0; h];
    for i in 0..doc.d_enc.rows() {
        let row = d_denc.row_mut(i);
        axpy(gstart[i], &dec.u_start, row);
        axpy(gend[i], &dec.u_end, row);
        axpy(gstart[i], doc.d_enc.row(i), &mut d_us);
        axpy(gend[i], doc.d_enc.row(i), &mut d_ue);
    }
    outer_acc(grads.w_start.data_mut(), &d_us, &dec.q_tilde);
    outer_acc(grads.w_end.data_mut(), &d_ue, &dec.q_tilde);
    let mut d_qt = vec![0.0; h];
    matvec_t_acc(p.w_start.data(), &d_us, &mut d_qt);
    matvec_t_acc(p.w_end.data(), &d_ue, &mut d_qt);

    let mut d_wq = projection_grad(&q);
    backward_document(&p.encoder, &q, &doc, &d_denc, &mut grads.encoder, &mut d_wq);

    let mut d_qenc = q.q_enc.zeros_like();
    let d_beta: Vec<f64> = (0..q.q_enc.rows()).map(|j| dot(&d_qt, q.q_enc.row(j))).collect();
    let d_scores = softmax_backward(&dec.beta, &d_beta);
    for j in 0..q.q_enc.rows() {
        let row = d_qenc.row_mut(j);
        axpy(dec.beta[j], &d_qt, row);
        axpy(d_scores[j], p.w1.data(), row);
        axpy(d_scores[j], q.q_enc.row(j), grads.w1.data_mut());
    }
    backward_question(&p.encoder, &q, &d_qenc, &d_wq, &mut grads.encoder);
    Some(Contribution {
        loss: ls + le,
        terms: 1,
        grads,
    })
}

pub fn example_loss_value(p: &ReaderParams, input: &ReaderInput) -> f64 {
    example_loss(p, input, &mut Mode::Infer).map_or(0.0, |c| c.loss)
}

/// Which part of the document the reader sees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    #[default]
    Full,
    Oracle,
    Minimal,
}

/// Sentences fed to the reader for `ex`. `None` when the mode has nothing to
/// feed (no oracle sentence, or no selection for this id).
pub fn input_sentences(ex: &QaExample, mode: InputMode, selections: Option<&HashMap<String, Vec<usize>>>) -> Option<Vec<usize>> {
    match mode {
        InputMode::Full => Some((0..ex.sentences.len()).collect()),
        InputMode::Oracle => {
            let span = ex.first_aligned_span()?;
            ex.sentence_of_token(span.start).map(|s| vec![s])
        }
        InputMode::Minimal => selections?.get(&ex.id).cloned(),
    }
}

/// Training inputs for `mode`. Examples whose gold span is not fully inside
/// the fed sentences get `gold: None` and are skipped by training.
pub fn build_reader_inputs(
    dataset: &[QaExample],
    table: &EmbeddingTable,
    mode: InputMode,
    selections: Option<&HashMap<String, Vec<usize>>>,
) -> Result<Vec<ReaderInput>> {
    if mode == InputMode::Minimal && selections.is_none() {
        return Err(Error::Config("minimal input mode needs a selection".into()));
    }
    Ok(dataset
        .iter()
        .map(|ex| {
            let question = table.embed_tokens(&ex.question_tokens);
            match input_sentences(ex, mode, selections) {
                Some(sel) if !sel.is_empty() && ex.trainable() => {
                    let merged = merge_selected(ex, &sel);
                    let gold = ex
                        .first_aligned_span()
                        .and_then(|s| merged.span_to_merged(s))
                        .map(|TokenSpan { start, end }| (start, end - 1));
                    ReaderInput {
                        document: table.embed_tokens(&merged.tokens),
                        question,
                        gold,
                    }
                }
                _ => ReaderInput {
                    document: Tensor::zeros(&[0, table.dim()]),
                    question,
                    gold: None,
                },
            }
        })
        .collect())
}

pub fn train_reader(
    dataset: &[QaExample],
    table: &EmbeddingTable,
    params: &mut ReaderParams,
    hp: &Hyperparams,
    mode: InputMode,
    selections: Option<&HashMap<String, Vec<usize>>>,
    exec: Execution,
) -> Result<TrainHistory> {
    let inputs = build_reader_inputs(dataset, table, mode, selections)?;
    let usable = inputs.iter().filter(|i| i.gold.is_some()).count();
    if usable == 0 && hp.epochs > 0 {
        return Err(Error::Data(format!("no example has a gold span in {mode:?} input")));
    }
    train(&inputs, params, hp, exec, example_loss)
}

/// Inference wrapper around trained reader parameters.
#[derive(Debug, Clone, Copy)]
pub struct Reader<'a> {
    pub params: &'a ReaderParams,
    pub table: &'a EmbeddingTable,
    pub max_answer_len: usize,
}

impl<'a> Reader<'a> {
    pub fn new(params: &'a ReaderParams, table: &'a EmbeddingTable) -> Self {
        Self {
            params,
            table,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
        }
    }

    pub fn predict_merged(&self, ex: &QaExample, merged: &MergedContext) -> SpanPrediction {
        if merged.tokens.is_empty() {
            return SpanPrediction {
                start: 0,
                end: 0,
                text: String::new(),
                start_scores: Vec::new(),
                end_scores: Vec::new(),
            };
        }
        let q = encode_question(&self.table.embed_tokens(&ex.question_tokens), &self.params.encoder, &mut Mode::Infer);
        let doc = encode_document(&self.table.embed_tokens(&merged.tokens), &q, &self.params.encoder, &mut Mode::Infer);
        let (start_scores, end_scores) = decode_scores(&doc.d_enc, &q.q_enc, self.params);
        let (s, e) = predict_span(&start_scores, &end_scores, self.max_answer_len);
        SpanPrediction {
            start: merged.remap[s],
            end: merged.remap[e],
            text: merged.text(ex, s, e),
            start_scores,
            end_scores,
        }
    }

    /// Predict from the given sentences (ascending), or the whole document.
    pub fn predict(&self, ex: &QaExample, sentences: Option<&[usize]>) -> SpanPrediction {
        let all: Vec<usize>;
        let sel = match sentences {
            Some(s) => s,
            None => {
                all = (0..ex.sentences.len()).collect();
                &all
            }
        };
        self.predict_merged(ex, &merge_selected(ex, sel))
    }
}

impl SentenceReader for Reader<'_> {
    fn answer(&self, ex: &QaExample, sentences: &[usize]) -> String {
        self.predict(ex, Some(sentences)).text
    }
}

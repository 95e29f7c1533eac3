//! Sentence selector: scores each sentence independently for whether it
//! can answer the question.
//!
//! Decoder, for one sentence with encodings `D_enc` (`L_s × h`) and question
//! encodings `Q_enc` (`L_q × h`):
//!
//! ```text
//! β   = softmax_j(w · Q_enc_j)
//! q̃   = Σ_j β_j Q_enc_j
//! h̃_i[k] = Σ_{a,b} D_enc_i[a] · W2[a,k,b] · q̃[b]
//! h̃   = max_i h̃_i            (elementwise)
//! logits = W3ᵀ h̃             ([nonanswerable, answerable])
//! ```

use serde::{Deserialize, Serialize};

use crate::corpus::{QaExample, Token};
use crate::embed::EmbeddingTable;
use crate::encoder::{
    backward_document, backward_question, encode_document, encode_question, projection_grad, EncoderParams,
};
use crate::error::{Error, Result};
use crate::eval::token_f1;
use crate::exec::Execution;
use crate::neural::dropout::Mode;
use crate::neural::linalg::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc};
use crate::neural::ops::{cross_entropy_with_grad, log_sum_exp, softmax, softmax_backward};
use crate::neural::params::{join_name, load_named, zeros_like, Parameters};
use crate::neural::{Hyperparams, NamedTensor, Tensor};
use crate::rng::SplitMix64;
use crate::train::{train, Contribution, TrainHistory};

pub const NONANSWERABLE: usize = 0;
pub const ANSWERABLE: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorParams {
    pub encoder: EncoderParams,
    /// `h`
    pub w: Tensor,
    /// `h × h × h`, indexed `[a, k, b]`.
    pub w2: Tensor,
    /// `h × 2`
    pub w3: Tensor,
}

impl Parameters for SelectorParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.encoder.visit(&join_name(prefix, "encoder"), f);
        f(join_name(prefix, "w"), &self.w);
        f(join_name(prefix, "W2"), &self.w2);
        f(join_name(prefix, "W3"), &self.w3);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.encoder.visit_mut(&join_name(prefix, "encoder"), f);
        f(join_name(prefix, "w"), &mut self.w);
        f(join_name(prefix, "W2"), &mut self.w2);
        f(join_name(prefix, "W3"), &mut self.w3);
    }
}

/// Checkpoint prefix for selector tensors.
pub const PREFIX: &str = "selector";

impl SelectorParams {
    pub fn new(h_d: usize, h: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, 0x0053_454C);
        let encoder = EncoderParams::new(h_d, h, &mut rng);
        Self::with_encoder(encoder, &mut rng)
    }

    /// Fresh decoder on top of the given encoder.
    pub fn with_encoder(encoder: EncoderParams, rng: &mut SplitMix64) -> Self {
        let h = encoder.h();
        let bound = 1.0 / (h as f64).sqrt();
        Self {
            w: Tensor::uniform(&[h], bound, rng),
            w2: Tensor::uniform(&[h, h, h], bound, rng),
            w3: Tensor::uniform(&[h, 2], bound, rng),
            encoder,
        }
    }

    pub fn h(&self) -> usize {
        self.encoder.h()
    }

    pub fn from_named(tensors: &[NamedTensor]) -> Result<Self> {
        let w1 = find(tensors, "selector.encoder.W1")?;
        let w3 = find(tensors, "selector.W3")?;
        let mut p = Self::new(w1.rows(), w3.rows(), 0);
        load_named(&mut p, PREFIX, tensors)?;
        Ok(p)
    }
}

pub(crate) fn find<'a>(tensors: &'a [NamedTensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .map(|t| &t.tensor)
        .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
}

/// Per-question decoder quantities shared by all sentences.
struct QuestionSummary {
    beta: Vec<f64>,
    q_tilde: Vec<f64>,
    /// `m[a][k] = Σ_b W2[a,k,b] q̃[b]`, row-major `h × h`.
    m: Vec<f64>,
}

fn summarize(q_enc: &Tensor, p: &SelectorParams) -> QuestionSummary {
    let h = p.h();
    let scores: Vec<f64> = (0..q_enc.rows()).map(|j| dot(p.w.data(), q_enc.row(j))).collect();
    let beta = softmax(&scores);
    let mut q_tilde = vec![0.0; h];
    for (j, b) in beta.iter().enumerate() {
        axpy(*b, q_enc.row(j), &mut q_tilde);
    }
    let mut m = vec![0.0; h * h];
    matvec_acc(p.w2.data(), &q_tilde, &mut m);
    QuestionSummary { beta, q_tilde, m }
}

struct SentenceForward {
    logits: [f64; 2],
    /// Max-pooled `h̃`, and the position each component came from.
    pooled: Vec<f64>,
    argmax: Vec<usize>,
}

fn sentence_forward(d_enc: &Tensor, s: &QuestionSummary, p: &SelectorParams) -> SentenceForward {
    let h = p.h();
    let mut pooled = vec![f64::NEG_INFINITY; h];
    let mut argmax = vec![0usize; h];
    let mut hi = vec![0.0; h];
    for i in 0..d_enc.rows() {
        hi.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(&s.m, d_enc.row(i), &mut hi);
        for k in 0..h {
            if hi[k] > pooled[k] {
                pooled[k] = hi[k];
                argmax[k] = i;
            }
        }
    }
    let mut logits = [0.0; 2];
    matvec_t_acc(p.w3.data(), &pooled, &mut logits);
    SentenceForward { logits, pooled, argmax }
}

/// Raw `[nonanswerable, answerable]` logits for one encoded sentence.
pub fn score_sentence(d_enc: &Tensor, q_enc: &Tensor, p: &SelectorParams) -> [f64; 2] {
    sentence_forward(d_enc, &summarize(q_enc, p), p).logits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence_index: usize,
    /// `None` for scores that do not come from the neural selector.
    pub raw_logits: Option<[f64; 2]>,
    pub score: f64,
}

/// Turn per-sentence logits into scores: softmax of the answerable logit
/// across sentences when `normalize`, otherwise each sentence's own
/// answerable probability.
pub fn scores_from_logits(logits: &[[f64; 2]], normalize: bool) -> Vec<SentenceScore> {
    let probs: Vec<f64> = if normalize {
        softmax(&logits.iter().map(|l| l[ANSWERABLE]).collect::<Vec<_>>())
    } else {
        logits.iter().map(|l| softmax(l)[ANSWERABLE]).collect()
    };
    logits
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(i, (l, score))| SentenceScore {
            sentence_index: i,
            raw_logits: Some(*l),
            score,
        })
        .collect()
}

/// Score every sentence of a paragraph (embedded, `L × h_d` each). The
/// question is encoded once; sentences are scored independently with
/// `exec`.
pub fn score_paragraph(
    sentences: &[Tensor],
    question: &Tensor,
    p: &SelectorParams,
    normalize: bool,
    exec: Execution,
) -> Vec<SentenceScore> {
    let q = encode_question(question, &p.encoder, &mut Mode::Infer);
    let summary = summarize(&q.q_enc, p);
    let logits = exec.map(sentences, |s| {
        let doc = encode_document(s, &q, &p.encoder, &mut Mode::Infer);
        sentence_forward(&doc.d_enc, &summary, p).logits
    });
    scores_from_logits(&logits, normalize)
}

/// Training objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Two-class cross-entropy for every sentence.
    #[default]
    PerSentence,
    /// `-log Σ_{positive} softmax_i(answerable logits)` over the paragraph.
    Normalized,
}

/// Sentences of one question with answerability labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledParagraph {
    pub id: String,
    pub question: Vec<Token>,
    pub sentences: Vec<Vec<Token>>,
    pub labels: Vec<bool>,
}

impl LabeledParagraph {
    /// Flat `(sentence, question, label)` view.
    pub fn pairs(&self) -> impl Iterator<Item = (&[Token], &[Token], bool)> {
        self.sentences
            .iter()
            .zip(&self.labels)
            .map(move |(s, &l)| (s.as_slice(), self.question.as_slice(), l))
    }
}

/// Embedded paragraph ready for training or gradient checks.
#[derive(Debug, Clone)]
pub struct EmbeddedParagraph {
    pub question: Tensor,
    pub sentences: Vec<Tensor>,
    pub labels: Vec<bool>,
}

impl EmbeddedParagraph {
    pub fn new(p: &LabeledParagraph, table: &EmbeddingTable) -> Self {
        Self {
            question: table.embed_tokens(&p.question),
            sentences: p.sentences.iter().map(|s| table.embed_tokens(s)).collect(),
            labels: p.labels.clone(),
        }
    }
}

/// Anything that can answer a question from a subset of its sentences.
pub trait SentenceReader {
    fn answer(&self, ex: &QaExample, sentences: &[usize]) -> String;
}

/// Labels are 1 for oracle sentences. With `modify`, an oracle sentence is
/// relabeled 0 when `reader`, given that sentence alone, scores zero F1
/// against every gold answer. Non-oracle sentences are never relabeled.
/// Examples unusable for training are left out.
pub fn build_selector_training_set(
    dataset: &[QaExample],
    reader: Option<&dyn SentenceReader>,
    modify: bool,
) -> Result<Vec<LabeledParagraph>> {
    if modify && reader.is_none() {
        return Err(Error::Config("data modification needs an oracle-trained reader".into()));
    }
    Ok(dataset
        .iter()
        .filter(|ex| ex.trainable() && !ex.oracle_sentence_indices.is_empty())
        .map(|ex| {
            let golds = ex.gold_texts();
            let labels = (0..ex.sentences.len())
                .map(|i| {
                    let oracle = ex.oracle_sentence_indices.contains(&i);
                    match (oracle, modify, reader) {
                        (true, true, Some(r)) => token_f1(&r.answer(ex, &[i]), &golds) > 0.0,
                        (o, _, _) => o,
                    }
                })
                .collect();
            LabeledParagraph {
                id: ex.id.clone(),
                question: ex.question_tokens.clone(),
                sentences: (0..ex.sentences.len()).map(|i| ex.sentence_tokens(i).to_vec()).collect(),
                labels,
            }
        })
        .collect())
}

/// Forward + backward for one paragraph. `None` when the objective has no
/// term (normalized objective without a positive sentence).
pub fn paragraph_loss(
    p: &SelectorParams,
    para: &EmbeddedParagraph,
    objective: Objective,
    mode: &mut Mode<'_>,
) -> Option<Contribution<SelectorParams>> {
    if para.sentences.is_empty() || (objective == Objective::Normalized && !para.labels.iter().any(|&l| l)) {
        return None;
    }
    let h = p.h();
    let q = encode_question(&para.question, &p.encoder, mode);
    let summary = summarize(&q.q_enc, p);
    let mut docs = Vec::with_capacity(para.sentences.len());
    let mut fwds = Vec::with_capacity(para.sentences.len());
    for s in &para.sentences {
        let doc = encode_document(s, &q, &p.encoder, mode);
        fwds.push(sentence_forward(&doc.d_enc, &summary, p));
        docs.push(doc);
    }

    let (loss, terms, dlogits): (f64, usize, Vec<[f64; 2]>) = match objective {
        Objective::PerSentence => {
            let mut loss = 0.0;
            let mut d = Vec::with_capacity(fwds.len());
            for (f, &label) in fwds.iter().zip(&para.labels) {
                let (l, g) = cross_entropy_with_grad(&f.logits, if label { ANSWERABLE } else { NONANSWERABLE });
                loss += l;
                d.push([g[0], g[1]]);
            }
            (loss, fwds.len(), d)
        }
        Objective::Normalized => {
            let z: Vec<f64> = fwds.iter().map(|f| f.logits[ANSWERABLE]).collect();
            let pos: Vec<f64> = z
                .iter()
                .zip(&para.labels)
                .filter(|(_, &l)| l)
                .map(|(v, _)| *v)
                .collect();
            let loss = log_sum_exp(&z) - log_sum_exp(&pos);
            let p_all = softmax(&z);
            let lse_pos = log_sum_exp(&pos);
            let d = z
                .iter()
                .zip(&para.labels)
                .zip(&p_all)
                .map(|((zi, &l), pa)| {
                    let p_pos = if l { (zi - lse_pos).exp() } else { 0.0 };
                    [0.0, pa - p_pos]
                })
                .collect();
            (loss, 1, d)
        }
    };

    let mut grads = zeros_like(p);
    let mut d_m = vec![0.0; h * h];
    let mut d_wq = projection_grad(&q);
    for ((doc, f), dl) in docs.iter().zip(&fwds).zip(&dlogits) {
        outer_acc(grads.w3.data_mut(), &f.pooled, dl);
        let mut d_pooled = vec![0.0; h];
        matvec_acc(p.w3.data(), dl, &mut d_pooled);
        let mut d_denc = doc.d_enc.zeros_like();
        for k in 0..h {
            let i = f.argmax[k];
            let g = d_pooled[k];
            if g == 0.0 {
                continue;
            }
            let row = doc.d_enc.row(i);
            let out = d_denc.row_mut(i);
            for a in 0..h {
                d_m[a * h + k] += row[a] * g;
                out[a] += summary.m[a * h + k] * g;
            }
        }
        backward_document(&p.encoder, &q, doc, &d_denc, &mut grads.encoder, &mut d_wq);
    }
    outer_acc(grads.w2.data_mut(), &d_m, &summary.q_tilde);
    let mut d_qt = vec![0.0; h];
    matvec_t_acc(p.w2.data(), &d_m, &mut d_qt);
    let mut d_qenc = q.q_enc.zeros_like();
    let d_beta: Vec<f64> = (0..q.q_enc.rows()).map(|j| dot(&d_qt, q.q_enc.row(j))).collect();
    let d_scores = softmax_backward(&summary.beta, &d_beta);
    for j in 0..q.q_enc.rows() {
        let row = d_qenc.row_mut(j);
        axpy(summary.beta[j], &d_qt, row);
        axpy(d_scores[j], p.w.data(), row);
        axpy(d_scores[j], q.q_enc.row(j), grads.w.data_mut());
    }
    backward_question(&p.encoder, &q, &d_qenc, &d_wq, &mut grads.encoder);
    Some(Contribution { loss, terms, grads })
}

/// Pure paragraph loss (dropout off), for gradient checks.
pub fn paragraph_loss_value(p: &SelectorParams, para: &EmbeddedParagraph, objective: Objective) -> f64 {
    paragraph_loss(p, para, objective, &mut Mode::Infer).map_or(0.0, |c| c.loss)
}

pub fn train_selector(
    training_set: &[LabeledParagraph],
    table: &EmbeddingTable,
    params: &mut SelectorParams,
    hp: &Hyperparams,
    objective: Objective,
    exec: Execution,
) -> Result<TrainHistory> {
    if training_set.is_empty() && hp.epochs > 0 {
        return Err(Error::Data("selector training set is empty".into()));
    }
    let embedded: Vec<EmbeddedParagraph> = training_set.iter().map(|p| EmbeddedParagraph::new(p, table)).collect();
    train(&embedded, params, hp, exec, |p, para, mode| paragraph_loss(p, para, objective, mode))
}

/// Selector whose encoder is copied from an oracle-trained reader checkpoint
/// (tensors `reader.encoder.*`), with a freshly initialized decoder.
pub fn transfer_encoder_weights(reader_ckpt: &[NamedTensor], h_d: usize, h: usize, seed: u64) -> Result<SelectorParams> {
    let mut encoder = EncoderParams::zeros(h_d, h);
    let mut failure = None;
    encoder.visit_mut("encoder", &mut |name, t| {
        if failure.is_some() {
            return;
        }
        let source = format!("reader.{name}");
        match reader_ckpt.iter().find(|nt| nt.name == source) {
            None => {
                failure = Some(Error::Transfer {
                    name: source,
                    message: "not present in reader checkpoint".into(),
                })
            }
            Some(nt) if nt.tensor.shape() != t.shape() => {
                failure = Some(Error::Transfer {
                    message: format!("shape {:?} does not match selector shape {:?}", nt.tensor.shape(), t.shape()),
                    name: source,
                })
            }
            Some(nt) => *t = nt.tensor.clone(),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut rng = SplitMix64::derive(seed, 0x5452_414E);
    Ok(SelectorParams::with_encoder(encoder, &mut rng))
}

//! Shared question-aware encoder.
//!
//! Each document position attends over the question embeddings through a
//! bilinear form `D_iᵀ W1 Q_j`; the attended question vector is concatenated
//! to the position's embedding and run through a BiLSTM. The question is
//! encoded by its own BiLSTM.

use crate::neural::dropout::{apply_mask, Mode};
use crate::neural::linalg::{dot, matvec_acc, outer_acc};
use crate::neural::lstm::{bilstm_backward, bilstm_forward, BiLstmTrace};
use crate::neural::ops::{softmax_backward, softmax_in_place};
use crate::neural::params::{join_name, Parameters};
use crate::neural::{BiLstmParams, Tensor};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `h_d × h_d` attention form.
    pub w1: Tensor,
    /// BiLSTM over `[D_i ; D^q_i]`, input `2·h_d`, output `h`.
    pub doc_lstm: BiLstmParams,
    /// BiLSTM over question embeddings, input `h_d`, output `h`.
    pub q_lstm: BiLstmParams,
}

impl EncoderParams {
    pub fn new(h_d: usize, h: usize, rng: &mut SplitMix64) -> Self {
        Self {
            w1: Tensor::uniform(&[h_d, h_d], 1.0 / (h_d as f64).sqrt(), rng),
            doc_lstm: BiLstmParams::new(2 * h_d, h, rng),
            q_lstm: BiLstmParams::new(h_d, h, rng),
        }
    }

    pub fn zeros(h_d: usize, h: usize) -> Self {
        Self {
            w1: Tensor::zeros(&[h_d, h_d]),
            doc_lstm: BiLstmParams::zeros(2 * h_d, h),
            q_lstm: BiLstmParams::zeros(h_d, h),
        }
    }

    pub fn h(&self) -> usize {
        self.q_lstm.output()
    }

    pub fn h_d(&self) -> usize {
        self.w1.rows()
    }
}

impl Parameters for EncoderParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join_name(prefix, "W1"), &self.w1);
        self.doc_lstm.visit(&join_name(prefix, "doc_bilstm"), f);
        self.q_lstm.visit(&join_name(prefix, "q_bilstm"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join_name(prefix, "W1"), &mut self.w1);
        self.doc_lstm.visit_mut(&join_name(prefix, "doc_bilstm"), f);
        self.q_lstm.visit_mut(&join_name(prefix, "q_bilstm"), f);
    }
}

/// Rows `W1 Q_j`, reused for every document position.
fn project_question(q: &Tensor, w1: &Tensor) -> Tensor {
    let h_d = w1.rows();
    let mut wq = Tensor::zeros(&[q.rows(), h_d]);
    for j in 0..q.rows() {
        matvec_acc(w1.data(), q.row(j), wq.row_mut(j));
    }
    wq
}

/// Returns `(D^q, α)` with `D^q` of shape `L_d × h_d` and `α` `L_d × L_q`.
fn attend_projected(d: &Tensor, q: &Tensor, wq: &Tensor) -> (Tensor, Tensor) {
    let (l_d, l_q) = (d.rows(), q.rows());
    let mut alpha = Tensor::zeros(&[l_d, l_q]);
    let mut dq = Tensor::zeros(&[l_d, q.cols()]);
    for i in 0..l_d {
        let a = alpha.row_mut(i);
        for (j, s) in a.iter_mut().enumerate() {
            *s = dot(d.row(i), wq.row(j));
        }
        softmax_in_place(a);
        let a = alpha.row(i).to_vec();
        let out = dq.row_mut(i);
        for (j, aj) in a.iter().enumerate() {
            crate::neural::linalg::axpy(*aj, q.row(j), out);
        }
    }
    (dq, alpha)
}

/// Question-aware document embeddings: row `i` is `Σ_j softmax_j(D_iᵀ W1 Q_j) Q_j`.
pub fn attend_question(d: &Tensor, q: &Tensor, w1: &Tensor) -> Tensor {
    attend_projected(d, q, &project_question(q, w1)).0
}

/// Encoded question plus what backprop needs.
#[derive(Debug, Clone)]
pub struct QuestionState {
    /// Question embeddings after input dropout.
    pub emb: Tensor,
    wq: Tensor,
    pub q_enc: Tensor,
    trace: BiLstmTrace,
    out_mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DocumentState {
    pub d_enc: Tensor,
    emb: Tensor,
    alpha: Tensor,
    trace: BiLstmTrace,
    out_mask: Option<Vec<f64>>,
}

pub fn encode_question(q_emb: &Tensor, p: &EncoderParams, mode: &mut Mode<'_>) -> QuestionState {
    let mut emb = q_emb.clone();
    let in_mask = mode.mask(emb.len());
    apply_mask(emb.data_mut(), in_mask.as_deref());
    let wq = project_question(&emb, &p.w1);
    let (mut q_enc, trace) = bilstm_forward(&p.q_lstm, &emb);
    let out_mask = mode.mask(q_enc.len());
    apply_mask(q_enc.data_mut(), out_mask.as_deref());
    QuestionState {
        emb,
        wq,
        q_enc,
        trace,
        out_mask,
    }
}

pub fn encode_document(d_emb: &Tensor, q: &QuestionState, p: &EncoderParams, mode: &mut Mode<'_>) -> DocumentState {
    let mut emb = d_emb.clone();
    let in_mask = mode.mask(emb.len());
    apply_mask(emb.data_mut(), in_mask.as_deref());
    let (dq, alpha) = attend_projected(&emb, &q.emb, &q.wq);
    let (mut d_enc, trace) = bilstm_forward(&p.doc_lstm, &emb.concat_cols(&dq));
    let out_mask = mode.mask(d_enc.len());
    apply_mask(d_enc.data_mut(), out_mask.as_deref());
    DocumentState {
        d_enc,
        emb,
        alpha,
        trace,
        out_mask,
    }
}

/// `(D_enc, Q_enc)`, both time-major (`L × h`).
pub fn encode(d_emb: &Tensor, q_emb: &Tensor, p: &EncoderParams, mode: &mut Mode<'_>) -> (Tensor, Tensor) {
    let q = encode_question(q_emb, p, mode);
    let d = encode_document(d_emb, &q, p, mode);
    (d.d_enc, q.q_enc)
}

/// Gradient accumulator for the question-side projection `W1 Q_j`, shared
/// by every document (sentence) encoded against the same question.
pub fn projection_grad(q: &QuestionState) -> Tensor {
    q.wq.zeros_like()
}

/// Backprop `dL/dD_enc` through the document branch. Writes the doc BiLSTM
/// gradients into `grads` and the attention's share into `d_wq`.
pub fn backward_document(
    p: &EncoderParams,
    q: &QuestionState,
    doc: &DocumentState,
    d_denc: &Tensor,
    grads: &mut EncoderParams,
    d_wq: &mut Tensor,
) {
    let mut dout = d_denc.clone();
    apply_mask(dout.data_mut(), doc.out_mask.as_deref());
    let dx = bilstm_backward(&p.doc_lstm, &doc.trace, &dout, &mut grads.doc_lstm, true)
        .expect("input gradient requested");
    let h_d = p.h_d();
    for i in 0..doc.emb.rows() {
        let d_dq = &dx.row(i)[h_d..];
        let alpha = doc.alpha.row(i);
        let d_alpha: Vec<f64> = (0..q.emb.rows()).map(|j| dot(d_dq, q.emb.row(j))).collect();
        let ds = softmax_backward(alpha, &d_alpha);
        for (j, g) in ds.iter().enumerate() {
            if *g != 0.0 {
                crate::neural::linalg::axpy(*g, doc.emb.row(i), d_wq.row_mut(j));
            }
        }
    }
}

/// Backprop `dL/dQ_enc` through the question branch and fold the
/// accumulated projection gradient into `dW1`.
pub fn backward_question(p: &EncoderParams, q: &QuestionState, d_qenc: &Tensor, d_wq: &Tensor, grads: &mut EncoderParams) {
    let mut dout = d_qenc.clone();
    apply_mask(dout.data_mut(), q.out_mask.as_deref());
    bilstm_backward(&p.q_lstm, &q.trace, &dout, &mut grads.q_lstm, false);
    for j in 0..q.emb.rows() {
        outer_acc(grads.w1.data_mut(), d_wq.row(j), q.emb.row(j));
    }
}

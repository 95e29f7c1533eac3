//! Single-layer LSTM and bidirectional LSTM with hand-derived backprop.
//!
//! Gate rows are laid out `[input, forget, candidate, output]`, each of
//! height `H`. Initial hidden and cell states are zero.

use super::linalg::{matvec_acc, matvec_t_acc, outer_acc};
use super::ops::sigmoid;
use super::params::{join_name, Parameters};
use super::tensor::Tensor;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × input`
    pub w_ih: Tensor,
    /// `4H × H`
    pub w_hh: Tensor,
    /// `4H`
    pub bias: Tensor,
}

impl LstmParams {
    /// Uniform `±1/√fan_in` weights, zero biases except forget gate `+1`.
    pub fn new(input: usize, hidden: usize, rng: &mut SplitMix64) -> Self {
        let w_ih = Tensor::uniform(&[4 * hidden, input], 1.0 / (input as f64).sqrt(), rng);
        let w_hh = Tensor::uniform(&[4 * hidden, hidden], 1.0 / (hidden as f64).sqrt(), rng);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Self { w_ih, w_hh, bias }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[4 * hidden, input]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.cols()
    }
}

impl Parameters for LstmParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join_name(prefix, "w_ih"), &self.w_ih);
        f(join_name(prefix, "w_hh"), &self.w_hh);
        f(join_name(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join_name(prefix, "w_ih"), &mut self.w_ih);
        f(join_name(prefix, "w_hh"), &mut self.w_hh);
        f(join_name(prefix, "bias"), &mut self.bias);
    }
}

/// Activations kept from a forward pass, indexed by sequence position.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    reverse: bool,
    inputs: Tensor,
    /// `L × 4H` post-activation gates.
    gates: Vec<f64>,
    cells: Vec<f64>,
    hidden: Vec<f64>,
}

impl LstmTrace {
    pub fn hidden_states(&self) -> &[f64] {
        &self.hidden
    }
}

fn order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

pub fn lstm_forward(p: &LstmParams, xs: &Tensor, reverse: bool) -> LstmTrace {
    let len = xs.rows();
    let hd = p.hidden();
    let g4 = 4 * hd;
    let mut gates = vec![0.0; len * g4];
    let mut cells = vec![0.0; len * hd];
    let mut hidden = vec![0.0; len * hd];
    let zeros = vec![0.0; hd];
    let mut prev: Option<usize> = None;
    for t in order(len, reverse) {
        let z = &mut gates[t * g4..(t + 1) * g4];
        z.copy_from_slice(p.bias.data());
        matvec_acc(p.w_ih.data(), xs.row(t), z);
        let (h_prev, c_prev) = match prev {
            Some(s) => (&hidden[s * hd..(s + 1) * hd], &cells[s * hd..(s + 1) * hd]),
            None => (&zeros[..], &zeros[..]),
        };
        matvec_acc(p.w_hh.data(), h_prev, z);
        let mut c_new = vec![0.0; hd];
        let mut h_new = vec![0.0; hd];
        for k in 0..hd {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hd + k]);
            let g = z[2 * hd + k].tanh();
            let o = sigmoid(z[3 * hd + k]);
            z[k] = i;
            z[hd + k] = f;
            z[2 * hd + k] = g;
            z[3 * hd + k] = o;
            c_new[k] = f * c_prev[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        cells[t * hd..(t + 1) * hd].copy_from_slice(&c_new);
        hidden[t * hd..(t + 1) * hd].copy_from_slice(&h_new);
        prev = Some(t);
    }
    LstmTrace {
        reverse,
        inputs: xs.clone(),
        gates,
        cells,
        hidden,
    }
}

/// Backprop through time. `dh` is `L × H`, the loss gradient w.r.t. each
/// emitted hidden state. Accumulates into `grads`; returns `dL/dx` when asked.
pub fn lstm_backward(p: &LstmParams, trace: &LstmTrace, dh: &[f64], grads: &mut LstmParams, want_dx: bool) -> Option<Tensor> {
    let len = trace.inputs.rows();
    let hd = p.hidden();
    let g4 = 4 * hd;
    let mut dx = want_dx.then(|| Tensor::zeros(&[len, p.input()]));
    let steps: Vec<usize> = order(len, trace.reverse).collect();
    let zeros = vec![0.0; hd];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; g4];
    for (n, &t) in steps.iter().enumerate().rev() {
        let prev = n.checked_sub(1).map(|m| steps[m]);
        let (h_prev, c_prev) = match prev {
            Some(s) => (&trace.hidden[s * hd..(s + 1) * hd], &trace.cells[s * hd..(s + 1) * hd]),
            None => (&zeros[..], &zeros[..]),
        };
        let gate = &trace.gates[t * g4..(t + 1) * g4];
        let c = &trace.cells[t * hd..(t + 1) * hd];
        for k in 0..hd {
            let (i, f, g, o) = (gate[k], gate[hd + k], gate[2 * hd + k], gate[3 * hd + k]);
            let tc = c[k].tanh();
            let dhk = dh[t * hd + k] + dh_next[k];
            let d_o = dhk * tc;
            let dc = dc_next[k] + dhk * o * (1.0 - tc * tc);
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = di * i * (1.0 - i);
            dz[hd + k] = df * f * (1.0 - f);
            dz[2 * hd + k] = dg * (1.0 - g * g);
            dz[3 * hd + k] = d_o * o * (1.0 - o);
        }
        outer_acc(grads.w_ih.data_mut(), &dz, trace.inputs.row(t));
        outer_acc(grads.w_hh.data_mut(), &dz, h_prev);
        for (b, d) in grads.bias.data_mut().iter_mut().zip(&dz) {
            *b += d;
        }
        if let Some(dx) = dx.as_mut() {
            matvec_t_acc(p.w_ih.data(), &dz, dx.row_mut(t));
        }
        dh_next.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.w_hh.data(), &dz, &mut dh_next);
    }
    dx
}

/// Forward and backward LSTMs whose outputs are concatenated per position.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    /// `output` is the concatenated width; each direction gets `output / 2`.
    pub fn new(input: usize, output: usize, rng: &mut SplitMix64) -> Self {
        Self {
            fwd: LstmParams::new(input, output / 2, rng),
            bwd: LstmParams::new(input, output / 2, rng),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            fwd: LstmParams::zeros(input, output / 2),
            bwd: LstmParams::zeros(input, output / 2),
        }
    }

    pub fn output(&self) -> usize {
        self.fwd.hidden() + self.bwd.hidden()
    }

    pub fn input(&self) -> usize {
        self.fwd.input()
    }
}

impl Parameters for BiLstmParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.fwd.visit(&join_name(prefix, "fwd"), f);
        self.bwd.visit(&join_name(prefix, "bwd"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.fwd.visit_mut(&join_name(prefix, "fwd"), f);
        self.bwd.visit_mut(&join_name(prefix, "bwd"), f);
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
}

/// Returns the `L × H` output (`[forward_t ; backward_t]` per row) and the trace.
pub fn bilstm_forward(p: &BiLstmParams, xs: &Tensor) -> (Tensor, BiLstmTrace) {
    let fwd = lstm_forward(&p.fwd, xs, false);
    let bwd = lstm_forward(&p.bwd, xs, true);
    let (hf, hb) = (p.fwd.hidden(), p.bwd.hidden());
    let len = xs.rows();
    let mut out = Tensor::zeros(&[len, hf + hb]);
    for t in 0..len {
        let row = out.row_mut(t);
        row[..hf].copy_from_slice(&fwd.hidden[t * hf..(t + 1) * hf]);
        row[hf..].copy_from_slice(&bwd.hidden[t * hb..(t + 1) * hb]);
    }
    (out, BiLstmTrace { fwd, bwd })
}

/// Inference-only BiLSTM.
pub fn bilstm(xs: &Tensor, p: &BiLstmParams) -> Tensor {
    bilstm_forward(p, xs).0
}

pub fn bilstm_backward(
    p: &BiLstmParams,
    trace: &BiLstmTrace,
    dout: &Tensor,
    grads: &mut BiLstmParams,
    want_dx: bool,
) -> Option<Tensor> {
    let (hf, hb) = (p.fwd.hidden(), p.bwd.hidden());
    let len = dout.rows();
    let mut dh_f = vec![0.0; len * hf];
    let mut dh_b = vec![0.0; len * hb];
    for t in 0..len {
        let row = dout.row(t);
        dh_f[t * hf..(t + 1) * hf].copy_from_slice(&row[..hf]);
        dh_b[t * hb..(t + 1) * hb].copy_from_slice(&row[hf..]);
    }
    let dx_f = lstm_backward(&p.fwd, &trace.fwd, &dh_f, &mut grads.fwd, want_dx);
    let dx_b = lstm_backward(&p.bwd, &trace.bwd, &dh_b, &mut grads.bwd, want_dx);
    match (dx_f, dx_b) {
        (Some(mut a), Some(b)) => {
            a.add_assign(&b);
            Some(a)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::grad_check;
    use crate::neural::params::zeros_like;

    fn random_seq(len: usize, dim: usize, seed: u64) -> Tensor {
        Tensor::uniform(&[len, dim], 1.0, &mut SplitMix64::new(seed))
    }

    #[test]
    fn zero_weights_give_zero_states() {
        let p = BiLstmParams::zeros(3, 4);
        let out = bilstm(&random_seq(5, 3, 1), &p);
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_step_both_directions_see_it() {
        let p = BiLstmParams::new(3, 4, &mut SplitMix64::new(2));
        let xs = random_seq(1, 3, 3);
        let out = bilstm(&xs, &p);
        let f = lstm_forward(&p.fwd, &xs, false);
        let b = lstm_forward(&p.bwd, &xs, false);
        assert_eq!(&out.row(0)[..2], f.hidden_states());
        assert_eq!(&out.row(0)[2..], b.hidden_states());
    }

    #[test]
    fn reversal_swaps_directions() {
        let p = BiLstmParams::new(3, 6, &mut SplitMix64::new(4));
        let swapped = BiLstmParams {
            fwd: p.bwd.clone(),
            bwd: p.fwd.clone(),
        };
        let xs = random_seq(5, 3, 5);
        let mut rev_rows: Vec<Vec<f64>> = (0..5).map(|t| xs.row(t).to_vec()).collect();
        rev_rows.reverse();
        let xs_rev = Tensor::from_rows(&rev_rows, 3);
        let out = bilstm(&xs, &p);
        let out_rev = bilstm(&xs_rev, &swapped);
        for t in 0..5 {
            let a = out.row(t);
            let b = out_rev.row(4 - t);
            assert_eq!(&a[..3], &b[3..]);
            assert_eq!(&a[3..], &b[..3]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SplitMix64::new(11);
        let p = BiLstmParams::new(3, 4, &mut rng);
        let xs = random_seq(4, 3, 12);
        let target = random_seq(4, 4, 13);
        let loss = |p: &BiLstmParams| {
            let out = bilstm(&xs, p);
            out.data().iter().zip(target.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, trace) = bilstm_forward(&p, &xs);
        let mut grads = zeros_like(&p);
        bilstm_backward(&p, &trace, &target, &mut grads, false);
        let report = grad_check(&p, &grads, loss, 1e-3);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let p = BiLstmParams::new(2, 4, &mut SplitMix64::new(21));
        let xs = random_seq(3, 2, 22);
        let target = random_seq(3, 4, 23);
        let loss = |xs: &Tensor| {
            bilstm(xs, &p).data().iter().zip(target.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, trace) = bilstm_forward(&p, &xs);
        let mut grads = zeros_like(&p);
        let dx = bilstm_backward(&p, &trace, &target, &mut grads, true).unwrap();
        for k in 0..xs.len() {
            let mut plus = xs.clone();
            let mut minus = xs.clone();
            plus.data_mut()[k] += 1e-6;
            minus.data_mut()[k] -= 1e-6;
            let num = (loss(&plus) - loss(&minus)) / 2e-6;
            assert!((num - dx.data()[k]).abs() < 1e-7);
        }
    }
}

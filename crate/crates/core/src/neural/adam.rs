use super::params::{Hyperparams, Parameters};
use crate::error::{Error, Result};

/// First/second moment estimates, stored in the parameters' visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let mut m = Vec::new();
        params.visit("", &mut |_, t| m.push(vec![0.0; t.len()]));
        let v = m.clone();
        Self { step: 0, m, v }
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.v[i]
    }
}

/// One bias-corrected Adam update. Gradients are validated before anything
/// is written, so a rejected step leaves params and state untouched.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState, hp: &Hyperparams) -> Result<()> {
    let mut grad_data: Vec<&[f64]> = Vec::new();
    let mut bad = None;
    grads.visit("", &mut |name, t| {
        if bad.is_none() && !t.all_finite() {
            bad = Some(name);
        }
        grad_data.push(t.data());
    });
    if let Some(name) = bad {
        return Err(Error::Numeric(format!("non-finite gradient in tensor `{name}`")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let mut i = 0;
    params.visit_mut("", &mut |_, p| {
        let g = grad_data[i];
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for (((x, gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * gi;
            *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *x -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
        i += 1;
    });
    Ok(())
}

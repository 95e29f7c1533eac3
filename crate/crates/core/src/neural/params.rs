use serde::{Deserialize, Serialize};

use super::tensor::{NamedTensor, Tensor};
use crate::error::{Error, Result};

/// A model's learnable tensors, addressable by checkpoint name.
///
/// Visiting order is fixed per type; gradients, optimizer state and
/// checkpoints all rely on it.
pub trait Parameters {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor));
}

pub fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn named_tensors<'a, P: Parameters + ?Sized>(p: &'a P, prefix: &str) -> Vec<(String, &'a Tensor)> {
    let mut out = Vec::new();
    p.visit(prefix, &mut |n, t| out.push((n, t)));
    out
}

pub fn to_named(p: &(impl Parameters + ?Sized), prefix: &str) -> Vec<NamedTensor> {
    named_tensors(p, prefix)
        .into_iter()
        .map(|(name, t)| NamedTensor {
            name,
            tensor: t.clone(),
        })
        .collect()
}

/// Overwrite every tensor of `p` from `source` by name; shapes must match.
pub fn load_named<P: Parameters + ?Sized>(p: &mut P, prefix: &str, source: &[NamedTensor]) -> Result<()> {
    let mut failure = None;
    p.visit_mut(prefix, &mut |name, t| {
        if failure.is_some() {
            return;
        }
        match source.iter().find(|nt| nt.name == name) {
            None => failure = Some(Error::Checkpoint(format!("missing tensor `{name}`"))),
            Some(nt) if nt.tensor.shape() != t.shape() => {
                failure = Some(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    nt.tensor.shape(),
                    t.shape()
                )))
            }
            Some(nt) => *t = nt.tensor.clone(),
        }
    });
    failure.map_or(Ok(()), Err)
}

pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut("", &mut |_, t| t.fill(0.0));
    z
}

/// `acc += g`, tensor by tensor.
pub fn accumulate<P: Parameters>(acc: &mut P, g: &P) {
    let src = named_tensors(g, "");
    let mut i = 0;
    acc.visit_mut("", &mut |_, t| {
        t.add_assign(src[i].1);
        i += 1;
    });
}

pub fn scale<P: Parameters>(p: &mut P, s: f64) {
    p.visit_mut("", &mut |_, t| t.scale(s));
}

pub fn global_norm<P: Parameters>(p: &P) -> f64 {
    let mut sq = 0.0;
    p.visit("", &mut |_, t| sq += t.sq_norm());
    sq.sqrt()
}

/// Rescale so the global L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<P: Parameters>(g: &mut P, max_norm: f64) -> f64 {
    let norm = global_norm(g);
    if norm > max_norm && norm > 0.0 {
        scale(g, max_norm / norm);
    }
    norm
}

pub fn count_params<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, t| n += t.len());
    n
}

/// Model and optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Encoder width; split evenly across the two LSTM directions.
    pub h: usize,
    /// Embedding width.
    pub h_d: usize,
    pub dropout_rate: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            h: 200,
            h_d: 300,
            dropout_rate: 0.2,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            batch_size: 32,
            clip_norm: 10.0,
            epochs: 10,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || !self.h.is_multiple_of(2) {
            return Err(Error::Config(format!("hidden size h must be even and positive, got {}", self.h)));
        }
        if self.h_d == 0 {
            return Err(Error::Config("embedding width h_d must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate must lie in [0,1), got {}", self.dropout_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.eps > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let hp = Hyperparams::default();
        assert_eq!(hp.h, 200);
        assert_eq!(hp.dropout_rate, 0.2);
        assert_eq!((hp.lr, hp.beta1, hp.beta2, hp.eps), (1e-3, 0.9, 0.999, 1e-8));
        hp.validate().unwrap();
    }

    #[test]
    fn odd_hidden_rejected() {
        let hp = Hyperparams { h: 7, ..Default::default() };
        assert!(matches!(hp.validate(), Err(Error::Config(_))));
    }
}

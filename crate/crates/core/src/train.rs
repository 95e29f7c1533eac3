//! Mini-batch training loop shared by the selector and the reader.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::neural::dropout::Mode;
use crate::neural::params::{accumulate, clip_global_norm, scale, zeros_like};
use crate::neural::{adam_step, AdamState, Hyperparams, Parameters};
use crate::rng::SplitMix64;

/// Loss and gradient for one example; `terms` is the number of loss terms
/// summed into `loss` (used for averaging over the batch).
pub struct Contribution<P> {
    pub loss: f64,
    pub terms: usize,
    pub grads: P,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub steps: Vec<StepLog>,
    /// Mean per-term loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Examples that produced no loss (e.g. no gold span in the input).
    pub skipped: usize,
}

/// Run `hp.epochs` epochs of shuffled mini-batch Adam.
///
/// Per-example gradients are computed with `exec` (possibly in parallel),
/// each example drawing dropout from its own stream seeded by
/// `(hp.seed, step, position in batch)`; they are summed in batch order so
/// results do not depend on the worker count.
pub fn train<P, E, F>(examples: &[E], params: &mut P, hp: &Hyperparams, exec: Execution, loss_fn: F) -> Result<TrainHistory>
where
    P: Parameters + Clone + Send + Sync,
    E: Sync,
    F: Fn(&P, &E, &mut Mode<'_>) -> Option<Contribution<P>> + Sync + Send,
{
    hp.validate()?;
    let mut history = TrainHistory::default();
    if examples.is_empty() {
        return if hp.epochs == 0 {
            Ok(history)
        } else {
            Err(Error::Data("empty training set".into()))
        };
    }
    let mut state = AdamState::new(params);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffler = SplitMix64::derive(hp.seed, 0x5348_5546);
    let mut step = 0usize;
    for epoch in 0..hp.epochs {
        shuffler.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_terms = 0usize;
        for batch in order.chunks(hp.batch_size) {
            let current: &P = params;
            let results: Vec<Option<Contribution<P>>> = exec.map_indexed(batch, |pos, &idx| {
                let mut rng = SplitMix64::derive(hp.seed ^ (step as u64).wrapping_mul(0x9E37_79B9), pos as u64 + 1);
                let mut mode = Mode::Train {
                    rng: &mut rng,
                    rate: hp.dropout_rate,
                };
                loss_fn(current, &examples[idx], &mut mode)
            });
            let mut grads = zeros_like(params);
            let mut loss = 0.0;
            let mut terms = 0usize;
            for r in results {
                match r {
                    Some(c) => {
                        loss += c.loss;
                        terms += c.terms;
                        accumulate(&mut grads, &c.grads);
                    }
                    None => {
                        if epoch == 0 {
                            history.skipped += 1;
                        }
                    }
                }
            }
            if terms == 0 {
                continue;
            }
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at step {step}")));
            }
            scale(&mut grads, 1.0 / terms as f64);
            clip_global_norm(&mut grads, hp.clip_norm);
            adam_step(params, &grads, &mut state, hp)
                .map_err(|e| Error::Numeric(format!("step {step}: {e}")))?;
            history.steps.push(StepLog {
                epoch,
                step,
                loss: loss / terms as f64,
            });
            epoch_loss += loss;
            epoch_terms += terms;
            step += 1;
        }
        history
            .epoch_losses
            .push(if epoch_terms == 0 { 0.0 } else { epoch_loss / epoch_terms as f64 });
    }
    Ok(history)
}

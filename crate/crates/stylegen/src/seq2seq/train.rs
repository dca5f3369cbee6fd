//! SGD training with teacher forcing, per-epoch dev perplexity and
//! lowest-perplexity model selection.

use crate::numerics::{sgd_step, Array, Graph, RngState};

use super::model::Model;
use super::{PreparedExample, Seq2SeqError};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    /// Multiplier applied to the learning rate after an epoch whose dev
    /// perplexity fails to improve on the best so far.
    pub lr_decay: f64,
    pub seed: u64,
    /// Print one line per epoch to stderr.
    pub quiet: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            learning_rate: 0.1,
            clip_norm: Some(5.0),
            lr_decay: 0.5,
            seed: 1,
            quiet: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_perplexity: f64,
    pub dev_perplexity: f64,
    pub learning_rate: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_dev_perplexity: f64,
}

/// Perplexity of a set under the current parameters (no dropout).
pub fn perplexity(model: &Model, examples: &[PreparedExample]) -> Result<f64, Seq2SeqError> {
    let mut total_nll = 0.0;
    let mut total_tokens = 0usize;
    for ex in examples {
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let tf = bound.teacher_forced_loss(&mut g, ex, false, RngState::new(0))?;
        total_nll += g.value(tf.sum_nll).scalar_value();
        total_tokens += tf.token_count;
    }
    Ok((total_nll / total_tokens as f64).exp())
}

/// Trains in shuffled mini-batches, evaluates dev perplexity after each
/// epoch, and restores the parameters of the best epoch before
/// returning. Fully deterministic for a fixed seed.
pub fn train(
    model: &mut Model,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    opts: &TrainOptions,
) -> Result<TrainReport, Seq2SeqError> {
    assert!(!train_set.is_empty(), "empty training set");
    let root = RngState::new(opts.seed).derive_str("train");
    let params = model.all_params();
    let batch_size = model.config.batch_size.max(1);

    let mut lr = opts.learning_rate;
    let mut best: Option<(usize, f64, Vec<Array>)> = None;
    let mut epochs = Vec::new();

    for epoch in 0..opts.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        root.derive_str("shuffle")
            .derive(epoch as u64)
            .stream()
            .shuffle(&mut order);

        let mut epoch_nll = 0.0;
        let mut epoch_tokens = 0usize;
        for (batch_no, batch) in order.chunks(batch_size).enumerate() {
            // Loss is the token-mean over the whole batch, so each
            // example's summed NLL is scaled by the batch token total.
            let batch_tokens: usize = batch
                .iter()
                .map(|&i| train_set[i].target_ids.len() + 1)
                .sum();
            for &i in batch {
                let ex = &train_set[i];
                let mut g = Graph::new();
                let bound = model.bind(&mut g);
                let ex_rng = root
                    .derive_str("dropout")
                    .derive(epoch as u64)
                    .derive(i as u64);
                let tf = bound.teacher_forced_loss(&mut g, ex, true, ex_rng)?;
                let nll = g.value(tf.sum_nll).scalar_value();
                if !nll.is_finite() {
                    return Err(Seq2SeqError::DivergedTraining {
                        epoch,
                        batch: batch_no,
                    });
                }
                epoch_nll += nll;
                epoch_tokens += tf.token_count;
                let scaled = g.scale(tf.sum_nll, 1.0 / batch_tokens as f64);
                g.backward(scaled)?;
            }
            if params.iter().any(|p| p.grad_has_non_finite()) {
                return Err(Seq2SeqError::DivergedTraining {
                    epoch,
                    batch: batch_no,
                });
            }
            sgd_step(&params, lr, opts.clip_norm);
        }

        let train_ppl = (epoch_nll / epoch_tokens as f64).exp();
        let dev_ppl = if dev_set.is_empty() {
            train_ppl
        } else {
            perplexity(model, dev_set)?
        };

        let improved = best.as_ref().map(|(_, b, _)| dev_ppl < *b).unwrap_or(true);
        if improved {
            best = Some((
                epoch,
                dev_ppl,
                params.iter().map(|p| p.value()).collect(),
            ));
        } else {
            lr *= opts.lr_decay;
        }
        let best_so_far = best.as_ref().map(|(_, b, _)| *b).unwrap();
        if !opts.quiet {
            eprintln!(
                "epoch {epoch:3}  train_ppl {train_ppl:9.4}  dev_ppl {dev_ppl:9.4}  lr {lr:.5}  best {best_so_far:9.4}"
            );
        }
        epochs.push(EpochStats {
            epoch,
            train_perplexity: train_ppl,
            dev_perplexity: dev_ppl,
            learning_rate: lr,
            best_so_far,
        });
    }

    let (best_epoch, best_dev, snapshot) = best.expect("at least one epoch");
    for (p, v) in params.iter().zip(snapshot) {
        p.set_value(v);
        p.zero_grad();
    }
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_dev_perplexity: best_dev,
    })
}

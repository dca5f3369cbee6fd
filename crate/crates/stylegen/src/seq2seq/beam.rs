//! Length-normalized beam search.

use crate::numerics::{Graph, RngState};
use crate::textpipe::{BOS_ID, EOS_ID, PAD_ID};

use super::model::Model;
use super::{ConstraintVector, Method, Seq2SeqError};

/// A decoded hypothesis. `finished` is false when nothing emitted EOS
/// within the length budget; the best unfinished hypothesis is returned
/// flagged rather than dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSequence {
    pub token_ids: Vec<u32>,
    /// Length-normalized log-probability, `logP / length`.
    pub score: f64,
    pub finished: bool,
}

struct Hypothesis {
    tokens: Vec<u32>,
    log_prob: f64,
    state: super::model::DecoderState,
}

impl Hypothesis {
    fn normalized(&self, extra: usize) -> f64 {
        self.log_prob / (self.tokens.len() + extra).max(1) as f64
    }
}

/// Decodes one source sequence. `beam_width = 1` is exactly greedy
/// decoding; ties are broken toward the lexicographically smaller token
/// id sequence, so output is deterministic for fixed parameters.
pub fn beam_generate(
    model: &Model,
    type_ids: &[u32],
    value_ids: &[u32],
    constraint: &ConstraintVector,
    beam_width: usize,
    max_len: usize,
) -> Result<GeneratedSequence, Seq2SeqError> {
    assert!(beam_width >= 1 && max_len >= 1);
    let rng = RngState::new(0);
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let encoded = bound.encode(&mut g, type_ids, value_ids, constraint, false, rng)?;
    let m3c = bound.constraint_node(&mut g, constraint, Method::M3)?;

    let mut active = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: encoded.init_state,
    }];
    let mut finished: Vec<(Vec<u32>, f64)> = Vec::new();

    for _ in 0..max_len {
        if active.is_empty() || finished.len() >= beam_width {
            break;
        }
        // (cumulative logp, token, source hyp index)
        let mut candidates: Vec<(f64, u32, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(active.len());
        for (h_idx, hyp) in active.iter().enumerate() {
            let prev = *hyp.tokens.last().unwrap_or(&BOS_ID);
            let (logits, next_state) = bound.decode_step(
                &mut g,
                &hyp.state,
                prev,
                encoded.states,
                m3c,
                false,
                rng,
            )?;
            let logp = g.log_softmax(logits)?;
            for (tok, &lp) in g.value(logp).data().iter().enumerate() {
                let tok = tok as u32;
                if tok == PAD_ID || tok == BOS_ID {
                    continue;
                }
                candidates.push((hyp.log_prob + lp, tok, h_idx));
            }
            next_states.push(next_state);
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("finite log-probabilities")
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut next_active = Vec::with_capacity(beam_width);
        for &(logp, tok, h_idx) in candidates.iter().take(beam_width) {
            let mut tokens = active[h_idx].tokens.clone();
            if tok == EOS_ID {
                let len = (tokens.len() + 1).max(1);
                finished.push((tokens, logp / len as f64));
            } else {
                tokens.push(tok);
                next_active.push(Hypothesis {
                    tokens,
                    log_prob: logp,
                    state: next_states[h_idx].clone(),
                });
            }
        }
        active = next_active;
    }

    // best finished by normalized score, ties to the smaller sequence
    finished.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    if let Some((tokens, score)) = finished.into_iter().next() {
        return Ok(GeneratedSequence {
            token_ids: tokens,
            score,
            finished: true,
        });
    }

    // nothing finished within max_len: return the best unfinished, flagged
    active.sort_by(|a, b| {
        b.normalized(0)
            .partial_cmp(&a.normalized(0))
            .expect("finite scores")
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    let best = active.into_iter().next().expect("at least one hypothesis");
    Ok(GeneratedSequence {
        score: best.normalized(0),
        token_ids: best.tokens,
        finished: false,
    })
}

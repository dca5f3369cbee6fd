//! Corpus-level multi-reference BLEU-4.

use std::collections::HashMap;

use crate::textpipe::TokenSequence;

use super::MetricsError;

const MAX_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU in `[0, 100]`: geometric mean of modified 1-4-gram
/// precisions times the brevity penalty, with closest-reference length
/// (ties toward the shorter reference). Unsmoothed by default: any
/// empty n-gram order zeroes the score. With `smoothing`, zero-count
/// orders use add-one smoothing instead.
pub fn bleu(
    outputs: &[TokenSequence],
    reference_sets: &[Vec<TokenSequence>],
    smoothing: bool,
) -> Result<f64, MetricsError> {
    if outputs.len() != reference_sets.len() {
        return Err(MetricsError::MisalignedCorpus {
            outputs: outputs.len(),
            references: reference_sets.len(),
        });
    }
    if outputs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }

    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let mut out_len = 0u64;
    let mut ref_len = 0u64;

    for (out, refs) in outputs.iter().zip(reference_sets) {
        if refs.is_empty() {
            return Err(MetricsError::EmptyCorpus);
        }
        let out_tokens = out.tokens();
        out_len += out_tokens.len() as u64;
        // closest reference length; ties broken toward the shorter
        let closest = refs
            .iter()
            .map(|r| r.len() as u64)
            .min_by_key(|&len| {
                let diff = (len as i64 - out_tokens.len() as i64).unsigned_abs();
                (diff, len)
            })
            .unwrap();
        ref_len += closest;

        for (n, (m_slot, t_slot)) in matches.iter_mut().zip(totals.iter_mut()).enumerate() {
            let n = n + 1;
            let out_counts = ngram_counts(out_tokens, n);
            if out_counts.is_empty() {
                continue;
            }
            let mut clipped: HashMap<&[String], u64> = HashMap::new();
            for r in refs {
                for (gram, count) in ngram_counts(r.tokens(), n) {
                    let best = clipped.entry(gram).or_insert(0);
                    *best = (*best).max(count);
                }
            }
            for (gram, count) in out_counts {
                *t_slot += count;
                *m_slot += count.min(clipped.get(gram).copied().unwrap_or(0));
            }
        }
    }

    let mut log_precision_sum = 0.0;
    for n in 0..MAX_ORDER {
        let (m, t) = (matches[n], totals[n]);
        let p = if m == 0 {
            if !smoothing {
                return Ok(0.0);
            }
            (m + 1) as f64 / (t + 1) as f64
        } else {
            m as f64 / t as f64
        };
        log_precision_sum += p.ln();
    }
    let bp = if out_len < ref_len {
        (1.0 - ref_len as f64 / out_len as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * bp * (log_precision_sum / MAX_ORDER as f64).exp())
}

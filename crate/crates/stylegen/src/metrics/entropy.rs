//! Shannon entropy over a pooled distribution of all unigrams, bigrams
//! and trigrams: `H = -sum_a (k_a/N) log2(k_a/N)` where `N` is the total
//! occurrence count across all three orders.

use std::collections::BTreeMap;

use crate::textpipe::TokenSequence;

use super::MetricsError;

/// Pooled n-gram occurrence counts (n in 1..=3).
#[derive(Debug, Clone, Default)]
pub struct NgramStats {
    counts: BTreeMap<Vec<String>, u64>,
    total: u64,
}

impl NgramStats {
    pub fn from_corpus(corpus: &[TokenSequence]) -> NgramStats {
        let mut stats = NgramStats::default();
        for seq in corpus {
            let toks = seq.tokens();
            for n in 1..=3usize {
                if toks.len() < n {
                    continue;
                }
                for window in toks.windows(n) {
                    *stats.counts.entry(window.to_vec()).or_insert(0) += 1;
                    stats.total += 1;
                }
            }
        }
        stats
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, gram: &[String]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn entropy_bits(&self) -> f64 {
        let n = self.total as f64;
        -self
            .counts
            .values()
            .map(|&k| {
                let p = k as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    }
}

/// Corpus entropy in bits.
pub fn entropy(corpus: &[TokenSequence]) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(NgramStats::from_corpus(corpus).entropy_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::tokenize;

    fn toks(s: &str) -> TokenSequence {
        tokenize(s).unwrap()
    }

    #[test]
    fn single_token_corpus_has_zero_entropy() {
        assert_eq!(entropy(&[toks("a")]).unwrap(), 0.0);
    }

    #[test]
    fn matches_closed_form_for_a_a_a() {
        // counts: "a" x3, "a a" x2, "a a a" x1; N = 6
        // H = -(1/2 log2 1/2 + 1/3 log2 1/3 + 1/6 log2 1/6)
        let h = entropy(&[toks("a a a")]).unwrap();
        let expected = -(0.5 * 0.5f64.log2()
            + (1.0 / 3.0) * (1.0f64 / 3.0).log2()
            + (1.0 / 6.0) * (1.0f64 / 6.0).log2());
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 1.4591479170272448).abs() < 1e-9);
    }

    #[test]
    fn duplicating_corpus_preserves_entropy() {
        let corpus = vec![toks("the eagle is cheap"), toks("aromi is nice")];
        let doubled: Vec<TokenSequence> =
            corpus.iter().cloned().chain(corpus.iter().cloned()).collect();
        let h1 = entropy(&corpus).unwrap();
        let h2 = entropy(&doubled).unwrap();
        assert!((h1 - h2).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(entropy(&[]), Err(MetricsError::EmptyCorpus)));
    }
}

//! Counting aggregation operations and pragmatic markers, and
//! correlating their per-personality usage between model outputs and
//! reference texts.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::mr::Personality;
use crate::textpipe::TokenSequence;

use super::pearson::pearson;
use super::MetricsError;

const DEFAULT_LEXICON: &str = include_str!("../../data/markers.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerCategory {
    Aggregation,
    Pragmatic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub name: String,
    pub category: MarkerCategory,
    pub patterns: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerLexicon {
    pub markers: Vec<Marker>,
}

impl MarkerLexicon {
    pub fn parse(text: &str) -> Result<MarkerLexicon, MetricsError> {
        let mut markers = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (name, category, patterns) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(MetricsError::MalformedTable {
                        line: lineno + 1,
                        reason: "expected 3 tab-separated fields".into(),
                    })
                }
            };
            let category = match category {
                "AGG" => MarkerCategory::Aggregation,
                "PRAG" => MarkerCategory::Pragmatic,
                other => {
                    return Err(MetricsError::MalformedTable {
                        line: lineno + 1,
                        reason: format!("unknown category `{other}`"),
                    })
                }
            };
            let patterns: Vec<Vec<String>> = patterns
                .split(';')
                .map(|p| p.split_whitespace().map(str::to_string).collect())
                .filter(|p: &Vec<String>| !p.is_empty())
                .collect();
            if patterns.is_empty() {
                return Err(MetricsError::MalformedTable {
                    line: lineno + 1,
                    reason: "no patterns".into(),
                });
            }
            markers.push(Marker {
                name: name.to_string(),
                category,
                patterns,
            });
        }
        Ok(MarkerLexicon { markers })
    }

    pub fn default_lexicon() -> &'static MarkerLexicon {
        static LEX: OnceLock<MarkerLexicon> = OnceLock::new();
        LEX.get_or_init(|| MarkerLexicon::parse(DEFAULT_LEXICON).expect("default marker lexicon"))
    }

    /// Occurrences of each marker in one token stream, non-overlapping
    /// per marker, longest pattern first.
    pub fn count_in(&self, text: &TokenSequence) -> Vec<u64> {
        let tokens = text.tokens();
        self.markers
            .iter()
            .map(|marker| {
                let mut count = 0u64;
                let mut i = 0;
                while i < tokens.len() {
                    let hit = marker
                        .patterns
                        .iter()
                        .filter(|p| {
                            p.len() <= tokens.len() - i && tokens[i..i + p.len()] == p[..]
                        })
                        .map(|p| p.len())
                        .max();
                    match hit {
                        Some(len) => {
                            count += 1;
                            i += len;
                        }
                        None => i += 1,
                    }
                }
                count
            })
            .collect()
    }
}

/// Mean marker occurrences per output, per personality. Labels are the
/// personality names from the dataset format.
pub fn marker_counts(
    labeled_outputs: &[(String, TokenSequence)],
    lexicon: &MarkerLexicon,
) -> Result<BTreeMap<Personality, Vec<f64>>, MetricsError> {
    let mut sums: BTreeMap<Personality, (Vec<f64>, usize)> = BTreeMap::new();
    for (label, text) in labeled_outputs {
        let personality = Personality::parse(label)
            .ok_or_else(|| MetricsError::UnknownPersonalityLabel(label.clone()))?;
        let counts = lexicon.count_in(text);
        let entry = sums
            .entry(personality)
            .or_insert_with(|| (vec![0.0; lexicon.markers.len()], 0));
        for (acc, c) in entry.0.iter_mut().zip(&counts) {
            *acc += *c as f64;
        }
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(p, (totals, n))| {
            let means = totals.into_iter().map(|t| t / n as f64).collect();
            (p, means)
        })
        .collect())
}

/// Correlation of one marker category for one personality. `degenerate`
/// marks a zero-variance side (the correlation is reported as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrOutcome {
    pub r: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonalityCorr {
    pub aggregation: CorrOutcome,
    pub pragmatic: CorrOutcome,
}

/// Per-personality and averaged correlations between model and
/// reference marker usage.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerCorrelations {
    pub per_personality: BTreeMap<Personality, PersonalityCorr>,
    pub aggregation_avg: f64,
    pub pragmatic_avg: f64,
}

fn category_corr(
    model: &[f64],
    reference: &[f64],
    lexicon: &MarkerLexicon,
    category: MarkerCategory,
) -> CorrOutcome {
    let xs: Vec<f64> = model
        .iter()
        .zip(&lexicon.markers)
        .filter(|(_, m)| m.category == category)
        .map(|(v, _)| *v)
        .collect();
    let ys: Vec<f64> = reference
        .iter()
        .zip(&lexicon.markers)
        .filter(|(_, m)| m.category == category)
        .map(|(v, _)| *v)
        .collect();
    match pearson(&xs, &ys) {
        Ok(res) => CorrOutcome {
            r: res.r,
            degenerate: false,
        },
        // A model that never varies a category (all-zero counts)
        // correlates with nothing; report 0 instead of failing.
        Err(MetricsError::ZeroVariance) => CorrOutcome {
            r: 0.0,
            degenerate: true,
        },
        Err(_) => CorrOutcome {
            r: 0.0,
            degenerate: true,
        },
    }
}

/// Computes mean counts for both sides, then correlates them per
/// personality and category. Personalities present on the reference
/// side only (or model side only) are skipped.
pub fn marker_correlations(
    model_outputs: &[(String, TokenSequence)],
    reference_outputs: &[(String, TokenSequence)],
    lexicon: &MarkerLexicon,
) -> Result<MarkerCorrelations, MetricsError> {
    let model_means = marker_counts(model_outputs, lexicon)?;
    let ref_means = marker_counts(reference_outputs, lexicon)?;
    let mut per_personality = BTreeMap::new();
    let mut agg_sum = 0.0;
    let mut prag_sum = 0.0;
    let mut n = 0usize;
    for (p, model) in &model_means {
        let Some(reference) = ref_means.get(p) else {
            continue;
        };
        let corr = PersonalityCorr {
            aggregation: category_corr(model, reference, lexicon, MarkerCategory::Aggregation),
            pragmatic: category_corr(model, reference, lexicon, MarkerCategory::Pragmatic),
        };
        agg_sum += corr.aggregation.r;
        prag_sum += corr.pragmatic.r;
        n += 1;
        per_personality.insert(*p, corr);
    }
    if n == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(MarkerCorrelations {
        per_personality,
        aggregation_avg: agg_sum / n as f64,
        pragmatic_avg: prag_sum / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::tokenize;

    fn toks(s: &str) -> TokenSequence {
        tokenize(s).unwrap()
    }

    fn idx(lex: &MarkerLexicon, name: &str) -> usize {
        lex.markers.iter().position(|m| m.name == name).unwrap()
    }

    #[test]
    fn ack_yeah_detected() {
        let lex = MarkerLexicon::default_lexicon();
        let counts = lex.count_in(&toks("yeah, i don't know. mmhm ..."));
        assert!(counts[idx(lex, "ack_yeah")] >= 1);
    }

    #[test]
    fn also_cue_detected() {
        let lex = MarkerLexicon::default_lexicon();
        let counts = lex.count_in(&toks("it has a bar, also it has a patio."));
        assert!(counts[idx(lex, "also_cue")] >= 1);
    }

    #[test]
    fn empty_lexicon_counts_nothing() {
        let lex = MarkerLexicon::default();
        assert!(lex.count_in(&toks("yeah, well, whatever!")).is_empty());
    }

    #[test]
    fn every_default_marker_row_present() {
        let lex = MarkerLexicon::default_lexicon();
        for name in [
            "with_cue",
            "conjunction",
            "also_cue",
            "ack_justification",
            "ack_yeah",
            "confirmation",
            "down_kind_of",
            "down_like",
            "exclaim",
            "general_softener",
            "emphasizer",
            "tag_question",
        ] {
            assert!(
                lex.markers.iter().any(|m| m.name == name),
                "missing marker {name}"
            );
        }
    }

    #[test]
    fn mean_counts_per_personality() {
        let lex = MarkerLexicon::default_lexicon();
        let outputs = vec![
            ("agreeable".to_string(), toks("yeah, it is nice.")),
            ("agreeable".to_string(), toks("it is nice.")),
            ("extravert".to_string(), toks("it is nice friend!")),
        ];
        let means = marker_counts(&outputs, lex).unwrap();
        let agr = &means[&Personality::Agreeable];
        assert!((agr[idx(lex, "ack_yeah")] - 0.5).abs() < 1e-12);
        let ext = &means[&Personality::Extravert];
        assert!((ext[idx(lex, "in_group")] - 1.0).abs() < 1e-12);
        assert!((ext[idx(lex, "exclaim")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_rejected() {
        let lex = MarkerLexicon::default_lexicon();
        let outputs = vec![("grumpy".to_string(), toks("hello"))];
        assert!(matches!(
            marker_counts(&outputs, lex),
            Err(MetricsError::UnknownPersonalityLabel(_))
        ));
    }

    #[test]
    fn identical_sides_correlate_perfectly() {
        let lex = MarkerLexicon::default_lexicon();
        let side = vec![
            ("agreeable".to_string(), toks("yeah, it is quite nice, alright?")),
            ("agreeable".to_string(), toks("well, it has a bar, also a patio.")),
            ("extravert".to_string(), toks("really great friend!")),
            ("extravert".to_string(), toks("it is just great, you see?")),
        ];
        let corr = marker_correlations(&side, &side, lex).unwrap();
        for pc in corr.per_personality.values() {
            assert!(!pc.pragmatic.degenerate);
            assert!((pc.pragmatic.r - 1.0).abs() < 1e-9);
        }
        assert!((corr.pragmatic_avg - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_model_counts_report_degenerate_zero() {
        let lex = MarkerLexicon::default_lexicon();
        let model = vec![("agreeable".to_string(), toks("it is a place token stream"))];
        let refs = vec![(
            "agreeable".to_string(),
            toks("yeah, it is quite nice, alright?"),
        )];
        let corr = marker_correlations(&model, &refs, lex).unwrap();
        let pc = &corr.per_personality[&Personality::Agreeable];
        assert!(pc.pragmatic.degenerate);
        assert_eq!(pc.pragmatic.r, 0.0);
    }
}

//! Contrast judging: did the realization attempt a discourse contrast,
//! and does the cue join two MR slots of opposite polarity?

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::mr::MeaningRepresentation;
use crate::textpipe::{normalize_value, TokenSequence};

use super::aligner::{SlotAligner, SlotRealization};
use super::MetricsError;

const DEFAULT_POLARITY: &str = include_str!("../../data/polarity.tsv");

/// Default contrast cue inventory, config-extensible.
pub const DEFAULT_CONTRAST_CUES: [&str; 4] = ["but", "although", "however", "yet"];

const SENTENCE_FINAL: [&str; 3] = [".", "!", "?"];

/// `(slot type, value) -> polarity` with +1 / -1 values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolarityTable {
    map: BTreeMap<(String, String), i8>,
}

impl PolarityTable {
    pub fn parse(text: &str) -> Result<PolarityTable, MetricsError> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (slot, value, sign) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(MetricsError::MalformedTable {
                        line: lineno + 1,
                        reason: "expected 3 tab-separated fields".into(),
                    })
                }
            };
            let polarity = match sign {
                "+" => 1i8,
                "-" => -1i8,
                other => {
                    return Err(MetricsError::MalformedTable {
                        line: lineno + 1,
                        reason: format!("polarity must be + or -, got `{other}`"),
                    })
                }
            };
            map.insert((slot.to_string(), normalize_value(value)), polarity);
        }
        Ok(PolarityTable { map })
    }

    pub fn default_table() -> &'static PolarityTable {
        static TABLE: OnceLock<PolarityTable> = OnceLock::new();
        TABLE.get_or_init(|| PolarityTable::parse(DEFAULT_POLARITY).expect("default polarity table"))
    }

    pub fn polarity(&self, slot_type: &str, value: &str) -> Option<i8> {
        self.map
            .get(&(slot_type.to_string(), normalize_value(value)))
            .copied()
    }
}

/// One judged realization. `valid` implies `attempted`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastJudgment {
    pub attempted: bool,
    pub valid: bool,
    pub evidence: Option<ContrastEvidence>,
}

/// The cue and slot pair supporting a valid judgment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastEvidence {
    pub cue: String,
    pub left: (String, String),
    pub right: (String, String),
}

/// Slots of the MR realized inside one clause, with their polarity.
fn polarized_slots(
    mr: &MeaningRepresentation,
    clause: &[String],
    aligner: &SlotAligner,
    polarity: &PolarityTable,
) -> Vec<(String, String, i8)> {
    if clause.is_empty() {
        return Vec::new();
    }
    let text = TokenSequence::new(clause.to_vec());
    aligner
        .align(mr, &text)
        .slots
        .into_iter()
        .filter_map(|slot| match slot.realization {
            SlotRealization::Correct { .. } => polarity
                .polarity(&slot.slot_type, &slot.expected_value)
                .map(|sign| (slot.slot_type, slot.expected_value, sign)),
            _ => None,
        })
        .collect()
}

/// A contrast is attempted when any cue token occurs; it is valid when
/// the clauses on either side of some cue realize two different MR
/// slots of opposite polarity. Clause bounds are the enclosing
/// sentence.
pub fn contrast_judge(
    mr: &MeaningRepresentation,
    text: &TokenSequence,
    aligner: &SlotAligner,
    polarity: &PolarityTable,
    cues: &[&str],
) -> ContrastJudgment {
    let tokens = text.tokens();
    let cue_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| cues.contains(&t.as_str()))
        .map(|(i, _)| i)
        .collect();
    if cue_positions.is_empty() {
        return ContrastJudgment {
            attempted: false,
            valid: false,
            evidence: None,
        };
    }

    for &pos in &cue_positions {
        let start = tokens[..pos]
            .iter()
            .rposition(|t| SENTENCE_FINAL.contains(&t.as_str()))
            .map(|i| i + 1)
            .unwrap_or(0);
        let end = tokens[pos + 1..]
            .iter()
            .position(|t| SENTENCE_FINAL.contains(&t.as_str()))
            .map(|i| pos + 1 + i)
            .unwrap_or(tokens.len());
        let left = polarized_slots(mr, &tokens[start..pos], aligner, polarity);
        let right = polarized_slots(mr, &tokens[pos + 1..end], aligner, polarity);
        for (l_slot, l_value, l_sign) in &left {
            for (r_slot, r_value, r_sign) in &right {
                if l_slot != r_slot && l_sign * r_sign == -1 {
                    return ContrastJudgment {
                        attempted: true,
                        valid: true,
                        evidence: Some(ContrastEvidence {
                            cue: tokens[pos].clone(),
                            left: (l_slot.clone(), l_value.clone()),
                            right: (r_slot.clone(), r_value.clone()),
                        }),
                    };
                }
            }
        }
    }
    ContrastJudgment {
        attempted: true,
        valid: false,
        evidence: None,
    }
}

/// Valid-over-attempted ratio. `no_attempts` flags the degenerate case
/// (accuracy reported as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastAccuracy {
    pub accuracy: f64,
    pub attempts: usize,
    pub valid: usize,
    pub no_attempts: bool,
}

pub fn contrast_accuracy(judgments: &[ContrastJudgment]) -> ContrastAccuracy {
    let attempts = judgments.iter().filter(|j| j.attempted).count();
    let valid = judgments.iter().filter(|j| j.valid).count();
    if attempts == 0 {
        return ContrastAccuracy {
            accuracy: 0.0,
            attempts: 0,
            valid: 0,
            no_attempts: true,
        };
    }
    ContrastAccuracy {
        accuracy: valid as f64 / attempts as f64,
        attempts,
        valid,
        no_attempts: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::parse_mr;
    use crate::textpipe::tokenize;

    fn judge(mr: &str, text: &str) -> ContrastJudgment {
        let aligner = SlotAligner::with_default_table();
        contrast_judge(
            &parse_mr(mr).unwrap(),
            &tokenize(text).unwrap(),
            &aligner,
            PolarityTable::default_table(),
            &DEFAULT_CONTRAST_CUES,
        )
    }

    #[test]
    fn opposite_polarity_across_cue_is_valid() {
        let j = judge(
            "name[Clowns], rating[high], familyFriendly[no]",
            "it has a high customer rating but is not child friendly",
        );
        assert!(j.attempted && j.valid);
        let e = j.evidence.unwrap();
        assert_eq!(e.cue, "but");
        assert_eq!(e.left.0, "rating");
        assert_eq!(e.right.0, "familyFriendly");
    }

    #[test]
    fn no_cue_means_not_attempted() {
        let j = judge(
            "name[Aromi], rating[low]",
            "Aromi has a low rating and that is all.",
        );
        assert!(!j.attempted && !j.valid);
    }

    #[test]
    fn same_polarity_is_attempted_but_invalid() {
        let j = judge(
            "name[Aromi], price[cheap], rating[high]",
            "it is cheap but it has a high rating",
        );
        assert!(j.attempted);
        assert!(!j.valid, "cheap(+) and high rating(+) do not contrast");
    }

    #[test]
    fn valid_implies_attempted_by_construction() {
        for (mr, text) in [
            ("name[A], price[cheap], rating[low]", "it is cheap but it has a low rating ."),
            ("name[A], price[cheap]", "it is cheap ."),
            ("name[A], price[cheap]", "it is cheap but nice ."),
        ] {
            let j = judge(mr, text);
            assert!(!j.valid || j.attempted);
        }
    }

    #[test]
    fn cue_in_other_sentence_does_not_validate() {
        // polar slots realized in different sentences from the cue
        let j = judge(
            "name[A], price[cheap], rating[low]",
            "it is cheap. it is nice but plain. it has a low rating.",
        );
        assert!(j.attempted);
        assert!(!j.valid);
    }

    #[test]
    fn accuracy_ratio() {
        let make = |attempted, valid| ContrastJudgment {
            attempted,
            valid,
            evidence: None,
        };
        // 379 valid of 474 attempted plus 26 non-attempts
        let mut judgments = Vec::new();
        for i in 0..474 {
            judgments.push(make(true, i < 379));
        }
        for _ in 0..26 {
            judgments.push(make(false, false));
        }
        let acc = contrast_accuracy(&judgments);
        assert_eq!(acc.attempts, 474);
        assert_eq!(acc.valid, 379);
        assert!((acc.accuracy - 379.0 / 474.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", acc.accuracy), "0.80");

        let empty = contrast_accuracy(&[make(false, false)]);
        assert!(empty.no_attempts);
        assert_eq!(empty.accuracy, 0.0);
        assert_eq!(empty.attempts, 0);

        let all = contrast_accuracy(&[make(true, true), make(true, true)]);
        assert_eq!(all.accuracy, 1.0);
    }
}

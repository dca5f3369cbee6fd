//! Rule-based slot aligner.
//!
//! Classifies how each MR slot is realized in a token stream using a
//! paraphrase table: `realized-correct` when any pattern of the slot's
//! expected value matches, `realized-wrong-value` when only patterns of
//! a different value of the same slot match, `absent` otherwise. Slot
//! cues occurring for slot types outside the MR count as
//! hallucinations.
//!
//! Matching is longest-pattern-first and non-overlapping per slot, so a
//! match of `not family friendly` is never double-counted as `family
//! friendly`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::mr::MeaningRepresentation;
use crate::textpipe::{normalize_value, placeholder_for, tokenize, TokenSequence};

use super::MetricsError;

const DEFAULT_TABLE: &str = include_str!("../../data/paraphrases.tsv");

/// `slot type -> value -> patterns` from the paraphrase table, plus
/// slot-name aliases (`rating` -> `customerRating` and so on) so the
/// two benchmark naming conventions share one set of rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotLexicon {
    by_slot: BTreeMap<String, BTreeMap<String, Vec<Vec<String>>>>,
    aliases: BTreeMap<String, String>,
}

impl SlotLexicon {
    pub fn parse(text: &str) -> Result<SlotLexicon, MetricsError> {
        let mut by_slot: BTreeMap<String, BTreeMap<String, Vec<Vec<String>>>> = BTreeMap::new();
        let mut aliases = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (first, second, third) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(MetricsError::MalformedTable {
                        line: lineno + 1,
                        reason: "expected 3 tab-separated fields".into(),
                    })
                }
            };
            if first == "@alias" {
                aliases.insert(second.to_string(), third.to_string());
                continue;
            }
            let parsed: Vec<Vec<String>> = third
                .split(';')
                .map(|p| p.split_whitespace().map(str::to_string).collect())
                .filter(|p: &Vec<String>| !p.is_empty())
                .collect();
            if parsed.is_empty() {
                return Err(MetricsError::MalformedTable {
                    line: lineno + 1,
                    reason: "no patterns".into(),
                });
            }
            by_slot
                .entry(first.to_string())
                .or_default()
                .entry(normalize_value(second))
                .or_default()
                .extend(parsed);
        }
        Ok(SlotLexicon { by_slot, aliases })
    }

    pub fn default_table() -> &'static SlotLexicon {
        static TABLE: OnceLock<SlotLexicon> = OnceLock::new();
        TABLE.get_or_init(|| SlotLexicon::parse(DEFAULT_TABLE).expect("default paraphrase table"))
    }

    /// Resolves a slot name to its canonical table name.
    pub fn canonical<'a>(&'a self, slot: &'a str) -> &'a str {
        self.aliases.get(slot).map(String::as_str).unwrap_or(slot)
    }

    pub fn listed_slot_types(&self) -> impl Iterator<Item = &String> {
        self.by_slot.keys()
    }

    /// Explicit patterns for a value, or its literal token sequence.
    fn patterns_for(&self, canonical_slot: &str, value: &str) -> Vec<Vec<String>> {
        if let Some(pats) = self
            .by_slot
            .get(canonical_slot)
            .and_then(|vals| vals.get(value))
        {
            return pats.clone();
        }
        tokenize(value)
            .map(|t| vec![t.tokens().to_vec()])
            .unwrap_or_default()
    }

    /// All values of a slot type known to the table.
    fn known_values(&self, canonical_slot: &str) -> Vec<String> {
        self.by_slot
            .get(canonical_slot)
            .map(|vals| vals.keys().cloned().collect())
            .unwrap_or_default()
    }
}

/// How one MR slot surfaced in the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotRealization {
    /// Expected value present; `mentions` counts every realization of
    /// this slot (extras are repeats).
    Correct { mentions: usize },
    /// Only a different value of this slot surfaced.
    WrongValue { matched_value: String, mentions: usize },
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotMatch {
    pub slot_type: String,
    pub expected_value: String,
    pub realization: SlotRealization,
}

/// Alignment of one (MR, realization) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub slots: Vec<SlotMatch>,
    /// `(slot type, occurrences)` for table-listed slots absent from
    /// the MR whose value cues surfaced anyway.
    pub hallucinations: Vec<(String, usize)>,
}

pub struct SlotAligner {
    lexicon: SlotLexicon,
}

impl SlotAligner {
    pub fn new(lexicon: SlotLexicon) -> Self {
        Self { lexicon }
    }

    pub fn with_default_table() -> Self {
        Self {
            lexicon: SlotLexicon::default_table().clone(),
        }
    }

    /// Counts non-overlapping occurrences per value for one slot type.
    /// At each position the longest matching pattern over all candidate
    /// values wins.
    fn scan_slot(
        &self,
        tokens: &[String],
        candidates: &[(String, Vec<Vec<String>>)],
    ) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut best: Option<(usize, &String)> = None;
            for (value, patterns) in candidates {
                for pat in patterns {
                    if pat.len() <= tokens.len() - i
                        && tokens[i..i + pat.len()] == pat[..]
                        && best.map(|(len, _)| pat.len() > len).unwrap_or(true)
                    {
                        best = Some((pat.len(), value));
                    }
                }
            }
            match best {
                Some((len, value)) => {
                    *counts.entry(value.clone()).or_insert(0) += 1;
                    i += len;
                }
                None => i += 1,
            }
        }
        counts
    }

    fn candidates_for(
        &self,
        original_slot: &str,
        expected_value: Option<&str>,
    ) -> Vec<(String, Vec<Vec<String>>)> {
        let canonical = self.lexicon.canonical(original_slot);
        let mut values: BTreeSet<String> =
            self.lexicon.known_values(canonical).into_iter().collect();
        if let Some(v) = expected_value {
            values.insert(v.to_string());
        }
        let mut out: Vec<(String, Vec<Vec<String>>)> = Vec::new();
        for value in values {
            let mut patterns = self.lexicon.patterns_for(canonical, &value);
            // the placeholder token realizes the expected value; both
            // the MR's own spelling and the canonical name count
            if Some(value.as_str()) == expected_value {
                patterns.push(vec![placeholder_for(original_slot)]);
                if canonical != original_slot {
                    patterns.push(vec![placeholder_for(canonical)]);
                }
            }
            out.push((value, patterns));
        }
        out
    }

    pub fn align(&self, mr: &MeaningRepresentation, text: &TokenSequence) -> Alignment {
        let tokens = text.tokens();
        let mut slots = Vec::with_capacity(mr.len());
        for sv in mr.slots() {
            let expected = normalize_value(&sv.slot_value);
            let candidates = self.candidates_for(&sv.slot_type, Some(&expected));
            let counts = self.scan_slot(tokens, &candidates);
            let own = counts.get(&expected).copied().unwrap_or(0);
            let total: usize = counts.values().sum();
            let realization = if own >= 1 {
                SlotRealization::Correct { mentions: total }
            } else if total >= 1 {
                let matched_value = counts
                    .iter()
                    .max_by_key(|(_, &c)| c)
                    .map(|(v, _)| v.clone())
                    .unwrap();
                SlotRealization::WrongValue {
                    matched_value,
                    mentions: total,
                }
            } else {
                SlotRealization::Absent
            };
            slots.push(SlotMatch {
                slot_type: sv.slot_type.clone(),
                expected_value: expected,
                realization,
            });
        }

        let mr_types: BTreeSet<&str> = mr
            .slots()
            .iter()
            .map(|sv| self.lexicon.canonical(&sv.slot_type))
            .collect();
        let mut hallucinations = Vec::new();
        for slot_type in self.lexicon.listed_slot_types() {
            if mr_types.contains(slot_type.as_str()) {
                continue;
            }
            let candidates = self.candidates_for(slot_type, None);
            let counts = self.scan_slot(tokens, &candidates);
            let total: usize = counts.values().sum();
            if total > 0 {
                hallucinations.push((slot_type.clone(), total));
            }
        }
        Alignment {
            slots,
            hallucinations,
        }
    }
}

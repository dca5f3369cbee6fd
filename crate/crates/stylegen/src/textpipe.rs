//! Tokenization, delexicalization/relexicalization and vocabularies.
//!
//! Delexicalization replaces open-class slot values (names, landmarks)
//! in reference text with `__SLOTTYPE__` placeholder tokens so the model
//! learns a small closed vocabulary; relexicalization reverses it after
//! generation and restores surface casing with a sentence-initial rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::mr::{DatasetRecord, MeaningRepresentation};

/// Punctuation split off as standalone tokens.
const PUNCT: [char; 7] = ['.', ',', '!', '?', ';', ':', '\''];

/// Sentence-final punctuation for recapitalization.
const SENTENCE_FINAL: [char; 3] = ['.', '!', '?'];

#[derive(Debug, thiserror::Error)]
pub enum TextPipeError {
    #[error("cannot tokenize empty input")]
    EmptyInput,
    #[error("output contains placeholder `{0}` with no delex entry")]
    UnknownPlaceholder(String),
    #[error("malformed vocabulary file: {0}")]
    MalformedVocabFile(String),
}

/// A tokenized realization. Tokens are never empty strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        Self(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

impl std::fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.joined())
    }
}

fn is_placeholder(token: &str) -> bool {
    token.len() > 4 && token.starts_with("__") && token.ends_with("__")
}

/// Placeholder token for a slot type: `name` -> `__NAME__`.
pub fn placeholder_for(slot_type: &str) -> String {
    format!("__{}__", slot_type.to_uppercase())
}

/// Lowercases and splits on whitespace, separating `. , ! ? ; : '` as
/// standalone tokens. Placeholder tokens (`__NAME__`) keep their casing
/// so delexicalized text survives a re-tokenization round trip.
pub fn tokenize(text: &str) -> Result<TokenSequence, TextPipeError> {
    let mut tokens: Vec<String> = Vec::new();
    for word in text.split_whitespace() {
        if is_placeholder(word) {
            tokens.push(word.to_string());
            continue;
        }
        let mut current = String::new();
        for ch in word.chars() {
            if PUNCT.contains(&ch) {
                if !current.is_empty() {
                    tokens.push(current.to_lowercase());
                    current = String::new();
                }
                tokens.push(ch.to_string());
            } else {
                current.push(ch);
            }
        }
        if !current.is_empty() {
            tokens.push(current.to_lowercase());
        }
    }
    if tokens.is_empty() {
        return Err(TextPipeError::EmptyInput);
    }
    Ok(TokenSequence::new(tokens))
}

/// One placeholder substitution performed during delexicalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelexEntry {
    pub placeholder: String,
    pub slot_type: String,
    pub surface: String,
}

/// The substitutions of one record, plus slots whose values never
/// occurred in the reference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelexMap {
    pub entries: Vec<DelexEntry>,
    pub unmatched: Vec<String>,
}

impl DelexMap {
    pub fn surface_of(&self, placeholder: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.placeholder == placeholder)
            .map(|e| e.surface.as_str())
    }

    /// Map built straight from an MR (used at generation time, when
    /// there is no reference to delexicalize).
    pub fn from_mr(mr: &MeaningRepresentation, config: &BTreeSet<String>) -> DelexMap {
        let mut map = DelexMap::default();
        for sv in mr.slots() {
            if config.contains(&sv.slot_type) {
                map.entries.push(DelexEntry {
                    placeholder: placeholder_for(&sv.slot_type),
                    slot_type: sv.slot_type.clone(),
                    surface: sv.slot_value.clone(),
                });
            }
        }
        map
    }
}

/// Replaces every occurrence of each configured slot's value (as a
/// contiguous token span) with its placeholder. Slots are processed
/// longest value first so overlapping values resolve deterministically;
/// within one slot, occurrences are replaced leftmost first.
pub fn delexicalize(
    mr: &MeaningRepresentation,
    reference: &TokenSequence,
    config: &BTreeSet<String>,
) -> (TokenSequence, DelexMap) {
    let mut targets: Vec<(&str, &str, Vec<String>)> = mr
        .slots()
        .iter()
        .filter(|sv| config.contains(&sv.slot_type))
        .filter_map(|sv| {
            tokenize(&sv.slot_value)
                .ok()
                .map(|toks| (sv.slot_type.as_str(), sv.slot_value.as_str(), toks.0))
        })
        .collect();
    // longest span first; ties keep MR order (sort is stable)
    targets.sort_by_key(|(_, _, toks)| std::cmp::Reverse(toks.len()));

    let mut tokens: Vec<String> = reference.tokens().to_vec();
    let mut map = DelexMap::default();

    for (slot_type, surface, value_tokens) in targets {
        let placeholder = placeholder_for(slot_type);
        let mut replaced = false;
        let mut i = 0;
        while i + value_tokens.len() <= tokens.len() {
            if tokens[i..i + value_tokens.len()] == value_tokens[..] {
                tokens.splice(i..i + value_tokens.len(), [placeholder.clone()]);
                replaced = true;
                i += 1;
            } else {
                i += 1;
            }
        }
        if replaced {
            map.entries.push(DelexEntry {
                placeholder,
                slot_type: slot_type.to_string(),
                surface: surface.to_string(),
            });
        } else {
            map.unmatched.push(slot_type.to_string());
        }
    }
    (TokenSequence::new(tokens), map)
}

/// Substitutes placeholders back, reattaches punctuation and capitalizes
/// sentence-initial words.
pub fn relexicalize(out: &TokenSequence, map: &DelexMap) -> Result<String, TextPipeError> {
    let mut chunks: Vec<String> = Vec::with_capacity(out.len());
    for token in out.tokens() {
        if is_placeholder(token) {
            match map.surface_of(token) {
                Some(surface) => chunks.push(surface.to_string()),
                None => return Err(TextPipeError::UnknownPlaceholder(token.clone())),
            }
        } else {
            chunks.push(token.clone());
        }
    }

    // capitalize the first chunk and chunks after sentence-final punctuation
    let mut capitalize_next = true;
    for chunk in chunks.iter_mut() {
        let is_final_punct = chunk.len() == 1
            && chunk.chars().next().map(|c| SENTENCE_FINAL.contains(&c)) == Some(true);
        if capitalize_next && chunk.chars().next().map(char::is_alphabetic) == Some(true) {
            let mut cs = chunk.chars();
            let first = cs.next().unwrap().to_uppercase().to_string();
            *chunk = first + cs.as_str();
            capitalize_next = false;
        } else if !is_final_punct && chunk.chars().any(char::is_alphanumeric) {
            capitalize_next = false;
        }
        if is_final_punct {
            capitalize_next = true;
        }
    }

    Ok(detokenize(&chunks))
}

/// Joins tokens with spaces, attaching `. , ! ? ; :` to the preceding
/// token and `'` to both neighbors.
fn detokenize(chunks: &[String]) -> String {
    let mut out = String::new();
    let mut suppress_space = true;
    for chunk in chunks {
        let is_attaching_punct =
            chunk.len() == 1 && chunk.chars().next().map(|c| PUNCT.contains(&c)) == Some(true);
        let is_apostrophe = chunk == "'";
        if !suppress_space && !is_attaching_punct {
            out.push(' ');
        }
        out.push_str(chunk);
        suppress_space = is_apostrophe;
    }
    out
}

// ---------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabKind {
    SlotType,
    SlotValue,
    TargetToken,
}

impl VocabKind {
    pub fn file_stem(&self) -> &'static str {
        match self {
            VocabKind::SlotType => "slot_type",
            VocabKind::SlotValue => "slot_value",
            VocabKind::TargetToken => "target_token",
        }
    }
}

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// A string <-> id bijection with the four reserved ids first.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    kind: VocabKind,
    strings: Vec<String>,
    counts: Vec<u64>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_sorted(kind: VocabKind, items: Vec<(String, u64)>) -> Self {
        let mut strings: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0u64; RESERVED.len()];
        for (s, c) in items {
            strings.push(s);
            counts.push(c);
        }
        let ids = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Self {
            kind,
            strings,
            counts,
            ids,
        }
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, s: &str) -> u32 {
        self.ids.get(s).copied().unwrap_or(UNK_ID)
    }

    pub fn decode(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    pub fn contains(&self, s: &str) -> bool {
        self.ids.contains_key(s)
    }

    /// File form: one `<id>\t<string>\t<count>` line per entry,
    /// reserved ids included.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, (s, c)) in self.strings.iter().zip(&self.counts).enumerate() {
            out.push_str(&format!("{i}\t{s}\t{c}\n"));
        }
        out
    }

    pub fn from_file_string(kind: VocabKind, text: &str) -> Result<Self, TextPipeError> {
        let mut strings = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split('\t');
            let (id, s, c) = match (parts.next(), parts.next(), parts.next()) {
                (Some(id), Some(s), Some(c)) => (id, s, c),
                _ => {
                    return Err(TextPipeError::MalformedVocabFile(format!(
                        "line {}: expected 3 tab-separated fields",
                        lineno + 1
                    )))
                }
            };
            let id: usize = id.parse().map_err(|_| {
                TextPipeError::MalformedVocabFile(format!("line {}: bad id", lineno + 1))
            })?;
            if id != strings.len() {
                return Err(TextPipeError::MalformedVocabFile(format!(
                    "line {}: ids must be sequential",
                    lineno + 1
                )));
            }
            let count: u64 = c.parse().map_err(|_| {
                TextPipeError::MalformedVocabFile(format!("line {}: bad count", lineno + 1))
            })?;
            strings.push(s.to_string());
            counts.push(count);
        }
        if strings.len() < RESERVED.len() || strings[..4] != RESERVED {
            return Err(TextPipeError::MalformedVocabFile(
                "first four entries must be the reserved ids".into(),
            ));
        }
        let ids = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(Self {
            kind,
            strings,
            counts,
            ids,
        })
    }
}

/// Counts items of `kind` across the corpus and assigns ids in
/// descending frequency order (ties lexicographic) after the reserved
/// ids. Items under `min_count` fall to UNK at encode time.
///
/// Target-token counting tokenizes every reference; slot values are
/// lowercased whole strings (one symbol per value).
pub fn build_vocab(corpus: &[DatasetRecord], kind: VocabKind, min_count: u64) -> Vocabulary {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut bump = |s: String| *counts.entry(s).or_insert(0) += 1;

    for record in corpus {
        match kind {
            VocabKind::SlotType => {
                for sv in record.mr.slots() {
                    bump(sv.slot_type.clone());
                }
            }
            VocabKind::SlotValue => {
                for sv in record.mr.slots() {
                    bump(normalize_value(&sv.slot_value));
                }
            }
            VocabKind::TargetToken => {
                for reference in &record.references {
                    if let Ok(toks) = tokenize(reference) {
                        for t in toks.tokens() {
                            bump(t.clone());
                        }
                    }
                }
            }
        }
    }

    let mut items: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_sorted(kind, items)
}

/// Canonical symbol form of a slot value.
pub fn normalize_value(value: &str) -> String {
    value.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::parse_mr;
    use proptest::prelude::*;

    #[test]
    fn tokenize_separates_punctuation() {
        let t = tokenize("The Eagle is cheap.").unwrap();
        assert_eq!(t.tokens(), ["the", "eagle", "is", "cheap", "."]);
    }

    #[test]
    fn tokenize_keeps_tag_question_separable() {
        let t = tokenize("alright?").unwrap();
        assert_eq!(t.tokens(), ["alright", "?"]);
    }

    #[test]
    fn tokenize_rejects_empty() {
        assert!(matches!(tokenize(""), Err(TextPipeError::EmptyInput)));
        assert!(matches!(tokenize("   "), Err(TextPipeError::EmptyInput)));
    }

    #[test]
    fn tokenize_idempotent_on_rejoined_output() {
        let t = tokenize("Did you say Browns Cambridge? Well, i see!").unwrap();
        let again = tokenize(&t.joined()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn tokenize_preserves_placeholder_case() {
        let t = tokenize("__NAME__ is cheap .").unwrap();
        assert_eq!(t.tokens(), ["__NAME__", "is", "cheap", "."]);
    }

    #[test]
    fn delex_single_match() {
        let mr = parse_mr("name[the eagle]").unwrap();
        let reference = tokenize("the eagle is cheap").unwrap();
        let config: BTreeSet<String> = ["name".to_string()].into();
        let (out, map) = delexicalize(&mr, &reference, &config);
        assert_eq!(out.tokens(), ["__NAME__", "is", "cheap"]);
        assert_eq!(map.surface_of("__NAME__"), Some("the eagle"));
        assert!(map.unmatched.is_empty());
    }

    #[test]
    fn delex_replaces_every_occurrence() {
        let mr = parse_mr("name[Browns Cambridge], near[Crowne Plaza Hotel]").unwrap();
        let reference = tokenize(
            "Browns Cambridge is near Crowne Plaza Hotel. Browns Cambridge has a three star \
             rating. Browns Cambridge is a family coffee shop.",
        )
        .unwrap();
        let config: BTreeSet<String> = ["name".to_string(), "near".to_string()].into();
        let (out, map) = delexicalize(&mr, &reference, &config);
        let names = out.tokens().iter().filter(|t| *t == "__NAME__").count();
        let nears = out.tokens().iter().filter(|t| *t == "__NEAR__").count();
        assert_eq!(names, 3);
        assert_eq!(nears, 1);
        assert_eq!(map.entries.len(), 2);
    }

    #[test]
    fn delex_records_unmatched() {
        let mr = parse_mr("near[burger king]").unwrap();
        let reference = tokenize("it is in the city centre").unwrap();
        let config: BTreeSet<String> = ["near".to_string()].into();
        let (out, map) = delexicalize(&mr, &reference, &config);
        assert_eq!(out, reference);
        assert_eq!(map.unmatched, vec!["near".to_string()]);
    }

    #[test]
    fn relex_substitutes_and_capitalizes() {
        let out = TokenSequence::new(
            ["__NAME__", "is", "cheap", "."]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let map = DelexMap {
            entries: vec![DelexEntry {
                placeholder: "__NAME__".into(),
                slot_type: "name".into(),
                surface: "the eagle".into(),
            }],
            unmatched: vec![],
        };
        assert_eq!(relexicalize(&out, &map).unwrap(), "The eagle is cheap.");
    }

    #[test]
    fn relex_capitalizes_after_sentence_final() {
        let out = tokenize("it is cheap . it is nice !").unwrap();
        let s = relexicalize(&out, &DelexMap::default()).unwrap();
        assert_eq!(s, "It is cheap. It is nice!");
    }

    #[test]
    fn relex_unknown_placeholder_errors() {
        let out = TokenSequence::new(vec!["__NEAR__".to_string()]);
        assert!(matches!(
            relexicalize(&out, &DelexMap::default()),
            Err(TextPipeError::UnknownPlaceholder(_))
        ));
    }

    #[test]
    fn delex_relex_roundtrip_preserves_lowercased_tokens() {
        let mr = parse_mr("name[The Eagle], near[Burger King], food[English]").unwrap();
        let reference =
            tokenize("The Eagle serves English food near Burger King. The Eagle is cheap.")
                .unwrap();
        let config: BTreeSet<String> = ["name".to_string(), "near".to_string()].into();
        let (delexed, map) = delexicalize(&mr, &reference, &config);
        let restored = relexicalize(&delexed, &map).unwrap();
        assert_eq!(tokenize(&restored).unwrap(), reference);
    }

    #[test]
    fn vocab_orders_by_frequency_then_name() {
        let records: Vec<DatasetRecord> = (0..10)
            .map(|i| DatasetRecord {
                mr: parse_mr(if i < 5 {
                    "name[x], food[y]"
                } else {
                    "name[x]"
                })
                .unwrap(),
                constraint: crate::mr::StyleConstraint::None,
                references: vec!["a".into()],
            })
            .collect();
        let v = build_vocab(&records, VocabKind::SlotType, 1);
        assert_eq!(v.encode("name"), 4);
        assert_eq!(v.encode("food"), 5);
        assert_eq!(v.encode("absent"), UNK_ID);
    }

    #[test]
    fn vocab_min_count_maps_rare_to_unk() {
        let records = vec![DatasetRecord {
            mr: parse_mr("name[x]").unwrap(),
            constraint: crate::mr::StyleConstraint::None,
            references: vec!["common common common rare rare".into()],
        }];
        let v = build_vocab(&records, VocabKind::TargetToken, 3);
        assert_ne!(v.encode("common"), UNK_ID);
        assert_eq!(v.encode("rare"), UNK_ID);
    }

    #[test]
    fn vocab_file_roundtrip() {
        let records = vec![DatasetRecord {
            mr: parse_mr("name[x], food[pasta]").unwrap(),
            constraint: crate::mr::StyleConstraint::None,
            references: vec!["__NAME__ serves pasta .".into()],
        }];
        let v = build_vocab(&records, VocabKind::TargetToken, 1);
        assert!(v.contains("__NAME__"));
        let text = v.to_file_string();
        let v2 = Vocabulary::from_file_string(VocabKind::TargetToken, &text).unwrap();
        assert_eq!(v, v2);
    }

    proptest! {
        #[test]
        fn encode_decode_identity_for_in_vocab(word in "[a-z]{1,8}") {
            let records = vec![DatasetRecord {
                mr: parse_mr("name[x]").unwrap(),
                constraint: crate::mr::StyleConstraint::None,
                references: vec![word.clone()],
            }];
            let v = build_vocab(&records, VocabKind::TargetToken, 1);
            let id = v.encode(&word);
            prop_assert_ne!(id, UNK_ID);
            prop_assert_eq!(v.decode(id), word.as_str());
        }

        #[test]
        fn tokenize_idempotence_property(s in "[a-zA-Z.,!?;:' ]{1,60}") {
            if let Ok(first) = tokenize(&s) {
                let second = tokenize(&first.joined()).unwrap();
                prop_assert_eq!(first, second);
            }
        }
    }
}

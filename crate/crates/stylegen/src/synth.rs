//! Deterministic synthetic benchmark corpora.
//!
//! Desk-scale stand-ins for the stylistic benchmarks: a personality
//! corpus whose surface markers are sampled from per-personality
//! Bernoulli profiles over the fine control bits, a minimal toggle
//! corpus where one constraint bit flips one surface token, and a
//! contrast corpus joining two polar slot realizations with `but` /
//! `and`.

use crate::mr::{
    DatasetRecord, MeaningRepresentation, Personality, SlotValue, StyleConstraint,
    FINE_PARAM_COUNT, PERSONALITIES,
};
use crate::numerics::{RngState, RngStream};

const NAMES: [&str; 16] = [
    "The Eagle",
    "Browns Cambridge",
    "The Golden Curry",
    "Aromi",
    "Fitzbillies",
    "Clowns",
    "Cotto",
    "The Punter",
    "Zizzi",
    "The Mill",
    "Green Man",
    "Loch Fyne",
    "The Phoenix",
    "Blue Spice",
    "Giraffe",
    "The Rice Boat",
];
const FOODS: [&str; 6] = ["italian", "english", "french", "chinese", "indian", "japanese"];
const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
const AREAS: [&str; 3] = ["riverside", "city centre", "uptown"];

/// The style markers driven by the first nine fine-control bits.
pub const MARKER_BITS: usize = 9;

/// Per-personality probability of each marker bit being set. Kept away
/// from 0.5 but mostly fractional, so label-only control reconstructs
/// marker presence imperfectly while bit-level control can match the
/// reference frequencies.
fn marker_profile(p: Personality) -> [f64; MARKER_BITS] {
    // yeah, well, really, quite, also, friend, exclaim, alright, with
    match p {
        Personality::Agreeable => [0.7, 0.3, 0.1, 0.6, 0.2, 0.1, 0.1, 0.6, 0.3],
        Personality::Disagreeable => [0.1, 0.1, 0.7, 0.05, 0.6, 0.0, 0.6, 0.1, 0.2],
        Personality::Conscientious => [0.0, 0.8, 0.1, 0.4, 0.1, 0.0, 0.05, 0.1, 0.7],
        Personality::Unconscientious => [0.8, 0.1, 0.2, 0.1, 0.7, 0.1, 0.2, 0.3, 0.1],
        Personality::Extravert => [0.3, 0.0, 0.7, 0.1, 0.3, 0.8, 0.7, 0.45, 0.4],
    }
}

/// Samples the 36 fine-control bits for one record (bits beyond
/// [`MARKER_BITS`] stay zero).
pub fn sample_bits(p: Personality, stream: &mut RngStream) -> [u8; FINE_PARAM_COUNT] {
    let profile = marker_profile(p);
    let mut bits = [0u8; FINE_PARAM_COUNT];
    for (slot, prob) in bits.iter_mut().zip(profile) {
        *slot = u8::from(stream.next_f64() < prob);
    }
    bits
}

/// Deterministic surface realization of the personality template under
/// the given marker bits.
pub fn realize_personality(mr: &MeaningRepresentation, bits: &[u8; FINE_PARAM_COUNT]) -> String {
    let name = mr.value_of("name").unwrap_or("the place");
    let food = mr.value_of("food").unwrap_or("local");
    let price = mr.value_of("priceRange").unwrap_or("cheap");
    let area = mr.value_of("area").unwrap_or("riverside");
    let b = |i: usize| bits[i] == 1;

    let mut parts: Vec<String> = Vec::new();
    if b(0) {
        parts.push("yeah ,".into());
    }
    if b(1) {
        parts.push("well ,".into());
    }
    parts.push(name.to_string());
    parts.push("is".into());
    if b(2) {
        parts.push("really".into());
    }
    if b(3) {
        parts.push("quite".into());
    }
    parts.push(format!("a {food} restaurant"));
    if b(8) {
        parts.push(format!("with {price} prices"));
    } else {
        parts.push(format!("and it has {price} prices"));
    }
    if b(4) {
        parts.push(format!(", also it is in {area}"));
    } else {
        parts.push(format!("in {area}"));
    }
    if b(5) {
        parts.push("friend".into());
    }
    parts.push(if b(6) { "!".into() } else { ".".into() });
    if b(7) {
        parts.push("alright ?".into());
    }
    parts.join(" ")
}

fn sample_personality_mr(stream: &mut RngStream) -> MeaningRepresentation {
    let slots = vec![
        SlotValue::new("name", NAMES[stream.next_below(NAMES.len())]),
        SlotValue::new("food", FOODS[stream.next_below(FOODS.len())]),
        SlotValue::new("priceRange", PRICES[stream.next_below(PRICES.len())]),
        SlotValue::new("area", AREAS[stream.next_below(AREAS.len())]),
    ];
    MeaningRepresentation::new(slots).expect("synthetic MR")
}

/// Train/dev/test splits of one synthetic task.
#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub train: Vec<DatasetRecord>,
    pub dev: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
}

fn personality_records(n: usize, stream: &mut RngStream) -> Vec<DatasetRecord> {
    (0..n)
        .map(|i| {
            let p = PERSONALITIES[i % PERSONALITIES.len()];
            let mr = sample_personality_mr(stream);
            let bits = sample_bits(p, stream);
            let reference = realize_personality(&mr, &bits);
            DatasetRecord {
                mr,
                constraint: StyleConstraint::fine(p, bits),
                references: vec![reference],
            }
        })
        .collect()
}

/// Multi-marker personality corpus, balanced across the five
/// personalities. Records carry the full fine-control bits; coarse runs
/// project them away.
pub fn personality_corpus(seed: u64, train_n: usize, dev_n: usize, test_n: usize) -> CorpusSplits {
    let root = RngState::new(seed).derive_str("synth-personality");
    CorpusSplits {
        train: personality_records(train_n, &mut root.derive_str("train").stream()),
        dev: personality_records(dev_n, &mut root.derive_str("dev").stream()),
        test: personality_records(test_n, &mut root.derive_str("test").stream()),
    }
}

/// Realization of the toggle template: the constraint bit inserts or
/// omits exactly one token.
pub fn realize_toggle(mr: &MeaningRepresentation, bit: bool) -> String {
    let name = mr.value_of("name").unwrap_or("the place");
    let food = mr.value_of("food").unwrap_or("local");
    if bit {
        format!("{name} really serves {food} food .")
    } else {
        format!("{name} serves {food} food .")
    }
}

/// The toggle token controlled by the constraint bit.
pub const TOGGLE_TOKEN: &str = "really";

/// Corpus where a single boolean constraint deterministically toggles
/// [`TOGGLE_TOKEN`]. Every MR appears with both constraint values so the
/// bit carries all the signal. Held-out MRs are fresh name/food draws.
pub fn toggle_corpus(
    seed: u64,
    train_mrs: usize,
    heldout: usize,
) -> (Vec<DatasetRecord>, Vec<MeaningRepresentation>) {
    let root = RngState::new(seed).derive_str("synth-toggle");
    let mut stream = root.derive_str("train").stream();
    let mut train = Vec::with_capacity(train_mrs * 2);
    for _ in 0..train_mrs {
        let mr = MeaningRepresentation::new(vec![
            SlotValue::new("name", NAMES[stream.next_below(NAMES.len())]),
            SlotValue::new("food", FOODS[stream.next_below(FOODS.len())]),
        ])
        .unwrap();
        for bit in [false, true] {
            train.push(DatasetRecord {
                mr: mr.clone(),
                constraint: StyleConstraint::contrast(bit),
                references: vec![realize_toggle(&mr, bit)],
            });
        }
    }
    let mut stream = root.derive_str("heldout").stream();
    let heldout = (0..heldout)
        .map(|_| {
            MeaningRepresentation::new(vec![
                SlotValue::new("name", NAMES[stream.next_below(NAMES.len())]),
                SlotValue::new("food", FOODS[stream.next_below(FOODS.len())]),
            ])
            .unwrap()
        })
        .collect();
    (train, heldout)
}

/// Realization of the contrast template: polar-opposite price and
/// rating slots joined with `but` (contrastive) or `and` (plain).
pub fn realize_contrast(mr: &MeaningRepresentation, contrast: bool) -> String {
    let name = mr.value_of("name").unwrap_or("the place");
    let price = mr.value_of("price").unwrap_or("cheap");
    let rating = mr.value_of("rating").unwrap_or("low");
    let cue = if contrast { "but" } else { "and" };
    format!("{name} is {price} {cue} it has a {rating} rating .")
}

/// Contrast corpus. Every MR holds one positively and one negatively
/// polarized value (cheap/low or expensive/high under the default
/// polarity table), so contrastive references are always valid
/// contrasts.
pub fn contrast_corpus(seed: u64, train_n: usize, dev_n: usize, test_n: usize) -> CorpusSplits {
    let root = RngState::new(seed).derive_str("synth-contrast");
    let make = |n: usize, stream: &mut RngStream| -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| {
                let contrast = i % 2 == 0;
                let (price, rating) = if stream.next_f64() < 0.5 {
                    ("cheap", "low")
                } else {
                    ("expensive", "high")
                };
                let mr = MeaningRepresentation::new(vec![
                    SlotValue::new("name", NAMES[stream.next_below(NAMES.len())]),
                    SlotValue::new("price", price),
                    SlotValue::new("rating", rating),
                ])
                .unwrap();
                DatasetRecord {
                    references: vec![realize_contrast(&mr, contrast)],
                    constraint: StyleConstraint::contrast(contrast),
                    mr,
                }
            })
            .collect()
    };
    CorpusSplits {
        train: make(train_n, &mut root.derive_str("train").stream()),
        dev: make(dev_n, &mut root.derive_str("dev").stream()),
        test: make(test_n, &mut root.derive_str("test").stream()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpora_are_deterministic_per_seed() {
        let a = personality_corpus(9, 20, 5, 5);
        let b = personality_corpus(9, 20, 5, 5);
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = personality_corpus(10, 20, 5, 5);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn personalities_balanced() {
        let corpus = personality_corpus(3, 50, 0, 0);
        let agreeable = corpus
            .train
            .iter()
            .filter(|r| {
                matches!(
                    r.constraint,
                    StyleConstraint::Personality {
                        personality: Personality::Agreeable,
                        ..
                    }
                )
            })
            .count();
        assert_eq!(agreeable, 10);
    }

    #[test]
    fn toggle_realization_differs_only_by_token() {
        let (_train, heldout) = toggle_corpus(4, 3, 2);
        let mr = &heldout[0];
        let with = realize_toggle(mr, true);
        let without = realize_toggle(mr, false);
        assert!(with.contains(TOGGLE_TOKEN));
        assert!(!without.contains(TOGGLE_TOKEN));
        assert_eq!(with.replace("really ", ""), without);
    }

    #[test]
    fn contrast_refs_use_cue() {
        let corpus = contrast_corpus(5, 10, 0, 0);
        for r in &corpus.train {
            let is_contrast = matches!(r.constraint, StyleConstraint::Contrast { contrast: true });
            assert_eq!(r.references[0].contains(" but "), is_contrast);
        }
    }

    #[test]
    fn realization_markers_follow_bits() {
        let corpus = personality_corpus(7, 5, 0, 0);
        for rec in &corpus.train {
            if let StyleConstraint::Personality {
                fine_params: Some(bits),
                ..
            } = &rec.constraint
            {
                let text = &rec.references[0];
                assert_eq!(text.contains("yeah"), bits[0] == 1);
                assert_eq!(text.contains("also"), bits[4] == 1);
                assert_eq!(text.contains('!'), bits[6] == 1);
            } else {
                panic!("expected fine personality constraint");
            }
        }
    }
}

//! Slot error rate: `(S + D + R + H) / N` over substitutions,
//! deletions, repeats and hallucinations, with `N` the number of slots
//! in the MR. More errors than slots is possible, so the rate may
//! exceed one.

use crate::mr::MeaningRepresentation;
use crate::textpipe::TokenSequence;

use super::aligner::{SlotAligner, SlotRealization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotErrorCounts {
    pub substitutions: u32,
    pub deletions: u32,
    pub repeats: u32,
    pub hallucinations: u32,
    pub slot_count: u32,
}

impl SlotErrorCounts {
    pub fn rate(&self) -> f64 {
        (self.substitutions + self.deletions + self.repeats + self.hallucinations) as f64
            / self.slot_count as f64
    }

    pub fn merge(&mut self, other: &SlotErrorCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.repeats += other.repeats;
        self.hallucinations += other.hallucinations;
        self.slot_count += other.slot_count;
    }
}

/// Aligns and scores one (MR, realization) pair. A slot mentioned `k`
/// times contributes `k - 1` repeats whether the mentions are right or
/// wrong; a slot whose only mentions carry another value is one
/// substitution; every value cue of a slot type outside the MR is one
/// hallucination.
pub fn ser(
    mr: &MeaningRepresentation,
    text: &TokenSequence,
    aligner: &SlotAligner,
) -> (SlotErrorCounts, f64) {
    let alignment = aligner.align(mr, text);
    let mut counts = SlotErrorCounts {
        slot_count: mr.len() as u32,
        ..Default::default()
    };
    for slot in &alignment.slots {
        match &slot.realization {
            SlotRealization::Correct { mentions } => {
                counts.repeats += (*mentions as u32).saturating_sub(1);
            }
            SlotRealization::WrongValue { mentions, .. } => {
                counts.substitutions += 1;
                counts.repeats += (*mentions as u32).saturating_sub(1);
            }
            SlotRealization::Absent => counts.deletions += 1,
        }
    }
    for (_, occurrences) in &alignment.hallucinations {
        counts.hallucinations += *occurrences as u32;
    }
    let rate = counts.rate();
    (counts, rate)
}

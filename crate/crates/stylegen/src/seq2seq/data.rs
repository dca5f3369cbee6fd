//! Turning dataset records into id sequences the model consumes.

use std::collections::BTreeSet;

use crate::mr::{DatasetRecord, Granularity, MeaningRepresentation, StyleConstraint};
use crate::textpipe::{
    delexicalize, normalize_value, tokenize, DelexMap, VocabKind, Vocabulary,
};

use super::model::apply_method1;
use super::{ConstraintVector, Method, Seq2SeqError};

/// The three vocabularies of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabSet {
    pub slot_type: Vocabulary,
    pub slot_value: Vocabulary,
    pub target: Vocabulary,
}

impl VocabSet {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            self.slot_type.len(),
            self.slot_value.len(),
            self.target.len(),
        )
    }
}

/// An id-encoded training or inference example. References are expected
/// to be delexicalized already; unknown symbols fall to UNK.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub type_ids: Vec<u32>,
    pub value_ids: Vec<u32>,
    pub constraint: ConstraintVector,
    /// Target token ids without BOS/EOS (added by the loss/decoder).
    pub target_ids: Vec<u32>,
}

/// Encodes the source side: method-1 augmentation, then id lookup.
pub fn prepare_source(
    mr: &MeaningRepresentation,
    constraint: &StyleConstraint,
    vocabs: &VocabSet,
    method: Method,
    granularity: Granularity,
) -> Result<(Vec<u32>, Vec<u32>, ConstraintVector), Seq2SeqError> {
    let constraint = constraint.project(granularity);
    let mr = if method == Method::M1 {
        apply_method1(mr, &constraint, granularity)?
    } else {
        mr.clone()
    };
    let type_ids = mr
        .slots()
        .iter()
        .map(|sv| vocabs.slot_type.encode(&sv.slot_type))
        .collect();
    let value_ids = mr
        .slots()
        .iter()
        .map(|sv| vocabs.slot_value.encode(&normalize_value(&sv.slot_value)))
        .collect();
    let cvec = match method {
        // The unconditioned model never sees the constraint.
        Method::NoCon => ConstraintVector::zeros(0),
        _ => ConstraintVector::encode(&constraint, granularity),
    };
    Ok((type_ids, value_ids, cvec))
}

/// Prepares a record's `reference_index`-th reference for training or
/// scoring.
pub fn prepare_example(
    record: &DatasetRecord,
    reference_index: usize,
    vocabs: &VocabSet,
    method: Method,
    granularity: Granularity,
) -> Result<PreparedExample, Seq2SeqError> {
    let (type_ids, value_ids, constraint) =
        prepare_source(&record.mr, &record.constraint, vocabs, method, granularity)?;
    let tokens = tokenize(&record.references[reference_index])
        .map_err(|e| Seq2SeqError::InvalidConfig(format!("unusable reference: {e}")))?;
    let target_ids = tokens
        .tokens()
        .iter()
        .map(|t| vocabs.target.encode(t))
        .collect();
    Ok(PreparedExample {
        type_ids,
        value_ids,
        constraint,
        target_ids,
    })
}

/// One record after reference-side lowercasing and delexicalization.
/// References hold the delexicalized token streams rejoined with single
/// spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedRecord {
    pub record: DatasetRecord,
    pub delex_maps: Vec<DelexMap>,
}

/// Tokenizes, lowercases and delexicalizes every reference of every
/// record. References that fail to tokenize are dropped with their
/// record when none survive.
pub fn process_records(
    records: &[DatasetRecord],
    delex_slots: &BTreeSet<String>,
) -> Vec<ProcessedRecord> {
    records
        .iter()
        .filter_map(|r| {
            let mut refs = Vec::new();
            let mut maps = Vec::new();
            for reference in &r.references {
                if let Ok(tokens) = tokenize(reference) {
                    let (delexed, map) = delexicalize(&r.mr, &tokens, delex_slots);
                    refs.push(delexed.joined());
                    maps.push(map);
                }
            }
            if refs.is_empty() {
                return None;
            }
            Some(ProcessedRecord {
                record: DatasetRecord {
                    mr: r.mr.clone(),
                    constraint: r.constraint.clone(),
                    references: refs,
                },
                delex_maps: maps,
            })
        })
        .collect()
}

/// Builds the vocab set for a corpus. Source-side vocabularies always
/// include the method-1 pseudo slots derivable from each record's own
/// constraint, so one ingested artifact serves all four methods.
pub fn build_vocab_set(records: &[DatasetRecord], min_count: u64) -> VocabSet {
    let augmented: Vec<DatasetRecord> = records
        .iter()
        .map(|r| {
            let granularity = match r.constraint {
                StyleConstraint::Personality {
                    fine_params: Some(_),
                    ..
                } => Granularity::Fine,
                _ => Granularity::Coarse,
            };
            match apply_method1(&r.mr, &r.constraint, granularity) {
                Ok(mr) => DatasetRecord {
                    mr,
                    constraint: r.constraint.clone(),
                    references: r.references.clone(),
                },
                Err(_) => r.clone(),
            }
        })
        .collect();
    VocabSet {
        slot_type: crate::textpipe::build_vocab(&augmented, VocabKind::SlotType, min_count),
        slot_value: crate::textpipe::build_vocab(&augmented, VocabKind::SlotValue, min_count),
        target: crate::textpipe::build_vocab(&augmented, VocabKind::TargetToken, min_count),
    }
}

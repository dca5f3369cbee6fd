//! Dataset ingestion: parse raw records, tokenize/delexicalize the
//! references, build vocabularies, and write everything to the work
//! directory with an ingestion report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mr::{parse_record, serialize_mr, DatasetRecord, StyleConstraint};
use crate::seq2seq::{build_vocab_set, process_records, sha256_hex, ProcessedRecord, VocabSet};
use crate::textpipe::{DelexEntry, DelexMap, VocabKind, Vocabulary};

use super::config::RunConfig;
use super::CliError;

/// Wire form of one processed record: the raw record fields with
/// delexicalized references plus the substitution map.
#[derive(Debug, Serialize, Deserialize)]
struct ProcessedLine {
    mr: String,
    style: serde_json::Value,
    refs: Vec<String>,
    delex: Vec<Vec<[String; 3]>>,
    unmatched: Vec<Vec<String>>,
}

pub fn read_raw_records(path: &Path) -> Result<Vec<DatasetRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line).map_err(|e| {
            CliError::Data(format!(
                "{}:{}: malformed record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "{} contains no records",
            path.display()
        )));
    }
    Ok(records)
}

fn style_json(constraint: &StyleConstraint) -> serde_json::Value {
    use serde_json::json;
    match constraint {
        StyleConstraint::None => json!({"personality": null, "params": null, "contrast": null}),
        StyleConstraint::Personality {
            personality,
            fine_params,
        } => json!({
            "personality": personality.label(),
            "params": fine_params.map(|b| b.to_vec()),
            "contrast": null,
        }),
        StyleConstraint::Contrast { contrast } => {
            json!({"personality": null, "params": null, "contrast": contrast})
        }
    }
}

pub fn write_processed(path: &Path, processed: &[ProcessedRecord]) -> Result<(), CliError> {
    let mut out = String::new();
    for p in processed {
        let line = ProcessedLine {
            mr: serialize_mr(&p.record.mr),
            style: style_json(&p.record.constraint),
            refs: p.record.references.clone(),
            delex: p
                .delex_maps
                .iter()
                .map(|m| {
                    m.entries
                        .iter()
                        .map(|e| {
                            [
                                e.placeholder.clone(),
                                e.slot_type.clone(),
                                e.surface.clone(),
                            ]
                        })
                        .collect()
                })
                .collect(),
            unmatched: p.delex_maps.iter().map(|m| m.unmatched.clone()).collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("processed record"));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_processed(path: &Path) -> Result<Vec<ProcessedRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ProcessedLine = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!(
                "{}:{}: malformed processed record: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        let raw = serde_json::json!({
            "mr": parsed.mr,
            "style": parsed.style,
            "refs": parsed.refs,
        });
        let record = parse_record(&raw.to_string()).map_err(|e| {
            CliError::Data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        let delex_maps = parsed
            .delex
            .iter()
            .zip(&parsed.unmatched)
            .map(|(entries, unmatched)| DelexMap {
                entries: entries
                    .iter()
                    .map(|[placeholder, slot_type, surface]| DelexEntry {
                        placeholder: placeholder.clone(),
                        slot_type: slot_type.clone(),
                        surface: surface.clone(),
                    })
                    .collect(),
                unmatched: unmatched.clone(),
            })
            .collect();
        records.push(ProcessedRecord {
            record,
            delex_maps,
        });
    }
    Ok(records)
}

/// Per-class record counts plus lineage, written as
/// `ingest_report.json`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct IngestReport {
    pub config_hash: String,
    pub seed: u64,
    pub splits: BTreeMap<String, SplitReport>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SplitReport {
    pub records: usize,
    pub by_class: BTreeMap<String, usize>,
    pub unmatched_delex_slots: usize,
}

fn class_of(constraint: &StyleConstraint) -> String {
    match constraint {
        StyleConstraint::None => "nocon".into(),
        StyleConstraint::Personality { personality, .. } => personality.label().to_string(),
        StyleConstraint::Contrast { contrast } => {
            if *contrast {
                "contrast".into()
            } else {
                "no-contrast".into()
            }
        }
    }
}

fn split_report(processed: &[ProcessedRecord]) -> SplitReport {
    let mut by_class: BTreeMap<String, usize> = BTreeMap::new();
    let mut unmatched = 0usize;
    for p in processed {
        *by_class.entry(class_of(&p.record.constraint)).or_insert(0) += 1;
        unmatched += p
            .delex_maps
            .iter()
            .map(|m| m.unmatched.len())
            .sum::<usize>();
    }
    SplitReport {
        records: processed.len(),
        by_class,
        unmatched_delex_slots: unmatched,
    }
}

pub struct IngestedData {
    pub report: IngestReport,
    pub vocabs: VocabSet,
}

/// Runs ingestion over the three splits named in the config and writes
/// processed records, vocabularies and the report under the work dir.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestedData, CliError> {
    let delex = config.delex_slots();
    let processed_dir = config.processed_dir();
    let vocab_dir = config.vocab_dir();
    std::fs::create_dir_all(&processed_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", processed_dir.display())))?;
    std::fs::create_dir_all(&vocab_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", vocab_dir.display())))?;

    let mut splits = BTreeMap::new();
    let mut train_processed = None;
    for (split, path) in [
        ("train", &config.paths.train),
        ("dev", &config.paths.dev),
        ("test", &config.paths.test),
    ] {
        let raw = read_raw_records(path)?;
        let processed = process_records(&raw, &delex);
        write_processed(&processed_dir.join(format!("{split}.jsonl")), &processed)?;
        splits.insert(split.to_string(), split_report(&processed));
        if split == "train" {
            train_processed = Some(processed);
        }
    }

    let train_records: Vec<DatasetRecord> = train_processed
        .expect("train split processed")
        .into_iter()
        .map(|p| p.record)
        .collect();
    let vocabs = build_vocab_set(&train_records, config.ingest.min_count);
    for (vocab, kind) in [
        (&vocabs.slot_type, VocabKind::SlotType),
        (&vocabs.slot_value, VocabKind::SlotValue),
        (&vocabs.target, VocabKind::TargetToken),
    ] {
        let path = vocab_dir.join(format!("{}.vocab", kind.file_stem()));
        std::fs::write(&path, vocab.to_file_string())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }

    let report = IngestReport {
        config_hash: config.config_hash(),
        seed: config.seed,
        splits,
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report json");
    std::fs::write(config.paths.work_dir.join("ingest_report.json"), report_json)
        .map_err(|e| CliError::Data(format!("cannot write ingest report: {e}")))?;
    Ok(IngestedData { report, vocabs })
}

/// Loads the three vocabularies from the work dir.
pub fn load_vocabs(config: &RunConfig) -> Result<VocabSet, CliError> {
    let vocab_dir = config.vocab_dir();
    let mut loaded = Vec::new();
    for kind in [
        VocabKind::SlotType,
        VocabKind::SlotValue,
        VocabKind::TargetToken,
    ] {
        let path = vocab_dir.join(format!("{}.vocab", kind.file_stem()));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        loaded.push(
            Vocabulary::from_file_string(kind, &text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        );
    }
    let mut it = loaded.into_iter();
    Ok(VocabSet {
        slot_type: it.next().unwrap(),
        slot_value: it.next().unwrap(),
        target: it.next().unwrap(),
    })
}

/// SHA-256 hex of a vocab file on disk.
pub fn vocab_file_hash(config: &RunConfig, kind: VocabKind) -> Result<String, CliError> {
    let path = config.vocab_dir().join(format!("{}.vocab", kind.file_stem()));
    let bytes = std::fs::read(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

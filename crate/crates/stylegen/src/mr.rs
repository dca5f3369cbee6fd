//! Meaning representations, style constraints and dataset records.
//!
//! The wire form of an MR is the benchmark surface convention, a
//! comma-separated list of `slot[value]` items:
//!
//! ```text
//! name[Browns Cambridge], eatType[coffee shop], food[Italian]
//! ```
//!
//! Dataset files are line-delimited JSON records (UTF-8, LF), one object
//! per line with fields `mr` (string in the convention above), `style`
//! (`personality` string or null, `params` array of 36 ints in {0,1} or
//! null, `contrast` boolean or null) and `refs` (non-empty string array).

use serde::{Deserialize, Serialize};

pub const FINE_PARAM_COUNT: usize = 36;

/// One `slot[value]` attribute. Both parts are non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotValue {
    pub slot_type: String,
    pub slot_value: String,
}

impl SlotValue {
    pub fn new(slot_type: impl Into<String>, slot_value: impl Into<String>) -> Self {
        Self {
            slot_type: slot_type.into(),
            slot_value: slot_value.into(),
        }
    }
}

/// An ordered, duplicate-free sequence of slot-value pairs. Order is
/// preserved exactly as given; the encoder is order-sensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeaningRepresentation {
    slots: Vec<SlotValue>,
}

impl MeaningRepresentation {
    pub fn new(slots: Vec<SlotValue>) -> Result<Self, MrError> {
        if slots.is_empty() {
            return Err(MrError::MalformedMr {
                offset: 0,
                reason: "meaning representation has no slots".into(),
            });
        }
        for (i, sv) in slots.iter().enumerate() {
            if sv.slot_type.is_empty() || sv.slot_value.is_empty() {
                return Err(MrError::MalformedMr {
                    offset: i,
                    reason: "empty slot type or value".into(),
                });
            }
            if slots[..i].iter().any(|o| o.slot_type == sv.slot_type) {
                return Err(MrError::MalformedMr {
                    offset: i,
                    reason: format!("duplicate slot_type `{}`", sv.slot_type),
                });
            }
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[SlotValue] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn value_of(&self, slot_type: &str) -> Option<&str> {
        self.slots
            .iter()
            .find(|sv| sv.slot_type == slot_type)
            .map(|sv| sv.slot_value.as_str())
    }
}

/// The five personality styles of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Personality {
    Agreeable,
    Disagreeable,
    Conscientious,
    Unconscientious,
    Extravert,
}

pub const PERSONALITIES: [Personality; 5] = [
    Personality::Agreeable,
    Personality::Disagreeable,
    Personality::Conscientious,
    Personality::Unconscientious,
    Personality::Extravert,
];

impl Personality {
    pub fn label(&self) -> &'static str {
        match self {
            Personality::Agreeable => "agreeable",
            Personality::Disagreeable => "disagreeable",
            Personality::Conscientious => "conscientious",
            Personality::Unconscientious => "unconscientious",
            Personality::Extravert => "extravert",
        }
    }

    /// Position in the 1-hot encoding.
    pub fn index(&self) -> usize {
        PERSONALITIES.iter().position(|p| p == self).unwrap()
    }

    pub fn parse(s: &str) -> Option<Personality> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "agreeable" => Some(Personality::Agreeable),
            "disagreeable" => Some(Personality::Disagreeable),
            "conscientious" => Some(Personality::Conscientious),
            "unconscientious" => Some(Personality::Unconscientious),
            "extravert" | "extrovert" => Some(Personality::Extravert),
            _ => None,
        }
    }
}

impl std::fmt::Display for Personality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Side-constraint signal attached to a record. Exactly the three
/// experiment configurations are representable: no conditioning, a
/// personality (optionally with 36 fine-grained bits), or a contrast
/// flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StyleConstraint {
    None,
    Personality {
        personality: Personality,
        fine_params: Option<[u8; FINE_PARAM_COUNT]>,
    },
    Contrast {
        contrast: bool,
    },
}

/// Control granularity: personality label only, or label plus the 36
/// binary style parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Coarse,
    Fine,
}

impl StyleConstraint {
    pub fn personality(p: Personality) -> Self {
        StyleConstraint::Personality {
            personality: p,
            fine_params: None,
        }
    }

    pub fn fine(p: Personality, bits: [u8; FINE_PARAM_COUNT]) -> Self {
        StyleConstraint::Personality {
            personality: p,
            fine_params: Some(bits),
        }
    }

    pub fn contrast(flag: bool) -> Self {
        StyleConstraint::Contrast { contrast: flag }
    }

    /// Drops information the given mode does not use (fine bits under
    /// coarse control). The strict consistency check is
    /// [`validate_constraint`].
    pub fn project(&self, mode: Granularity) -> StyleConstraint {
        match (self, mode) {
            (
                StyleConstraint::Personality { personality, .. },
                Granularity::Coarse,
            ) => StyleConstraint::personality(*personality),
            _ => self.clone(),
        }
    }
}

/// Checks a constraint against the configured control granularity and
/// returns it unchanged when consistent. Fine control requires the full
/// 36-bit parameter block; coarse control requires its absence.
pub fn validate_constraint(
    c: &StyleConstraint,
    mode: Granularity,
) -> Result<StyleConstraint, MrError> {
    match (c, mode) {
        (
            StyleConstraint::Personality {
                fine_params: None, ..
            },
            Granularity::Coarse,
        ) => Ok(c.clone()),
        (
            StyleConstraint::Personality {
                fine_params: Some(_),
                ..
            },
            Granularity::Fine,
        ) => Ok(c.clone()),
        (StyleConstraint::Personality { .. }, _) => Err(MrError::ConstraintModeMismatch {
            mode,
            detail: match mode {
                Granularity::Fine => "fine control requires the 36 style parameters".into(),
                Granularity::Coarse => "coarse control takes the personality label only".into(),
            },
        }),
        // Contrast and unconditioned records are granularity-free.
        (StyleConstraint::None, _) | (StyleConstraint::Contrast { .. }, _) => Ok(c.clone()),
    }
}

/// One (MR, style, references) example. Training records carry exactly
/// one reference; test records may carry several.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub mr: MeaningRepresentation,
    pub constraint: StyleConstraint,
    pub references: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MrError {
    #[error("malformed MR at byte offset {offset}: {reason}")]
    MalformedMr { offset: usize, reason: String },
    #[error("constraint inconsistent with {mode:?} control: {detail}")]
    ConstraintModeMismatch { mode: Granularity, detail: String },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
}

/// Parses the `slot[value], slot[value], ...` surface convention.
/// Whitespace around separators is stripped; bracketed values are taken
/// verbatim. Reports the byte offset of the first violation.
pub fn parse_mr(text: &str) -> Result<MeaningRepresentation, MrError> {
    let mut slots: Vec<SlotValue> = Vec::new();
    let mut pos = 0usize;
    let bytes = text.as_bytes();

    loop {
        // skip leading whitespace
        while pos < bytes.len() && (bytes[pos] as char).is_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            break;
        }
        let item_start = pos;
        let open = match text[pos..].find('[') {
            Some(rel) => pos + rel,
            None => {
                return Err(MrError::MalformedMr {
                    offset: item_start,
                    reason: "missing `[`".into(),
                })
            }
        };
        let slot_type = text[item_start..open].trim();
        if slot_type.contains(',') {
            return Err(MrError::MalformedMr {
                offset: item_start,
                reason: "missing `[`".into(),
            });
        }
        if slot_type.is_empty() {
            return Err(MrError::MalformedMr {
                offset: item_start,
                reason: "empty slot type".into(),
            });
        }
        let close = match text[open..].find(']') {
            Some(rel) => open + rel,
            None => {
                return Err(MrError::MalformedMr {
                    offset: open,
                    reason: "missing `]`".into(),
                })
            }
        };
        let value = &text[open + 1..close];
        if value.is_empty() {
            return Err(MrError::MalformedMr {
                offset: open + 1,
                reason: format!("empty value for slot `{slot_type}`"),
            });
        }
        if slots.iter().any(|sv| sv.slot_type == slot_type) {
            return Err(MrError::MalformedMr {
                offset: item_start,
                reason: format!("duplicate slot_type `{slot_type}`"),
            });
        }
        slots.push(SlotValue::new(slot_type, value));

        pos = close + 1;
        while pos < bytes.len() && (bytes[pos] as char).is_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() {
            if bytes[pos] != b',' {
                return Err(MrError::MalformedMr {
                    offset: pos,
                    reason: "expected `,` between items".into(),
                });
            }
            pos += 1;
        }
    }

    if slots.is_empty() {
        return Err(MrError::MalformedMr {
            offset: 0,
            reason: "meaning representation has no slots".into(),
        });
    }
    MeaningRepresentation::new(slots)
}

/// Canonical surface form: `slot[value]` items joined by `, `.
/// `parse_mr(serialize_mr(m)) == m` for every valid MR.
pub fn serialize_mr(mr: &MeaningRepresentation) -> String {
    mr.slots()
        .iter()
        .map(|sv| format!("{}[{}]", sv.slot_type, sv.slot_value))
        .collect::<Vec<_>>()
        .join(", ")
}

// ---------------------------------------------------------------------
// Dataset record wire format
// ---------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawStyle {
    personality: Option<String>,
    params: Option<Vec<u8>>,
    contrast: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    mr: String,
    style: RawStyle,
    refs: Vec<String>,
}

/// Parses one dataset line.
pub fn parse_record(line: &str) -> Result<DatasetRecord, MrError> {
    let raw: RawRecord = serde_json::from_str(line)
        .map_err(|e| MrError::MalformedRecord(format!("invalid JSON: {e}")))?;
    let mr = parse_mr(&raw.mr)?;
    if raw.refs.is_empty() {
        return Err(MrError::MalformedRecord("empty refs array".into()));
    }
    let constraint = match (raw.style.personality, raw.style.params, raw.style.contrast) {
        (None, None, None) => StyleConstraint::None,
        (Some(p), params, None) => {
            let personality = Personality::parse(&p)
                .ok_or_else(|| MrError::MalformedRecord(format!("unknown personality `{p}`")))?;
            let fine_params = match params {
                None => None,
                Some(bits) => {
                    if bits.len() != FINE_PARAM_COUNT || bits.iter().any(|&b| b > 1) {
                        return Err(MrError::MalformedRecord(format!(
                            "params must be {FINE_PARAM_COUNT} values in {{0,1}}"
                        )));
                    }
                    let mut arr = [0u8; FINE_PARAM_COUNT];
                    arr.copy_from_slice(&bits);
                    Some(arr)
                }
            };
            StyleConstraint::Personality {
                personality,
                fine_params,
            }
        }
        (None, None, Some(flag)) => StyleConstraint::Contrast { contrast: flag },
        _ => {
            return Err(MrError::MalformedRecord(
                "style must be personality(+params), contrast, or all-null".into(),
            ))
        }
    };
    Ok(DatasetRecord {
        mr,
        constraint,
        references: raw.refs,
    })
}

/// Serializes one record as a dataset line (no trailing newline).
pub fn serialize_record(record: &DatasetRecord) -> String {
    let style = match &record.constraint {
        StyleConstraint::None => RawStyle {
            personality: None,
            params: None,
            contrast: None,
        },
        StyleConstraint::Personality {
            personality,
            fine_params,
        } => RawStyle {
            personality: Some(personality.label().to_string()),
            params: fine_params.map(|b| b.to_vec()),
            contrast: None,
        },
        StyleConstraint::Contrast { contrast } => RawStyle {
            personality: None,
            params: None,
            contrast: Some(*contrast),
        },
    };
    let raw = RawRecord {
        mr: serialize_mr(&record.mr),
        style,
        refs: record.references.clone(),
    };
    serde_json::to_string(&raw).expect("record serialization")
}

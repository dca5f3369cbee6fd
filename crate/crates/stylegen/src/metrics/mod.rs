//! Evaluation: multi-reference corpus BLEU, slot error rate via a
//! rule-based aligner, pooled n-gram entropy, stylistic marker counts
//! with Pearson correlations, and contrast accuracy.
//!
//! The paraphrase, polarity and marker tables ship as data files under
//! `data/` and are compiled in as defaults; callers may load their own.

mod aligner;
mod bleu;
mod contrast;
mod entropy;
mod markers;
mod pearson;
mod ser;

pub use aligner::{Alignment, SlotAligner, SlotLexicon, SlotMatch, SlotRealization};
pub use bleu::bleu;
pub use contrast::{
    contrast_accuracy, contrast_judge, ContrastAccuracy, ContrastEvidence, ContrastJudgment,
    PolarityTable, DEFAULT_CONTRAST_CUES,
};
pub use entropy::{entropy, NgramStats};
pub use markers::{
    marker_correlations, marker_counts, CorrOutcome, Marker, MarkerCategory, MarkerCorrelations,
    MarkerLexicon, PersonalityCorr,
};
pub use pearson::{pearson, regularized_incomplete_beta, PearsonResult};
pub use ser::{ser, SlotErrorCounts};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("outputs ({outputs}) and reference sets ({references}) are not aligned")]
    MisalignedCorpus { outputs: usize, references: usize },
    #[error("series must have equal length >= 2 (got {xs} and {ys})")]
    BadSeries { xs: usize, ys: usize },
    #[error("zero variance in a correlation series")]
    ZeroVariance,
    #[error("unknown personality label `{0}`")]
    UnknownPersonalityLabel(String),
    #[error("malformed table at line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
}

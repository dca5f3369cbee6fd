//! Stylistically controlled natural language generation from slot-value
//! meaning representations.
//!
//! The crate covers the full pipeline:
//!
//! - [`mr`] — parsing and validation of meaning representations and style
//!   constraints, plus the line-delimited dataset record format
//! - [`textpipe`] — tokenization, delexicalization/relexicalization and
//!   vocabulary construction
//! - [`numerics`] — a small dense-array engine with reverse-mode automatic
//!   differentiation, Glorot init, dropout and SGD
//! - [`seq2seq`] — the attentional bi-LSTM encoder / LSTM decoder with three
//!   side-constraint injection methods, training and beam search
//! - [`metrics`] — multi-reference corpus BLEU, slot error rate, n-gram
//!   entropy, stylistic marker correlations and contrast accuracy
//! - [`synth`] — deterministic synthetic benchmark corpora for desk-scale
//!   experiments
//! - [`cli`] — the `ingest` / `train` / `generate` / `evaluate` / `grid`
//!   command surface used by the `stylegen` binary
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod metrics;
pub mod mr;
pub mod numerics;
pub mod seq2seq;
pub mod synth;
pub mod textpipe;

pub use mr::{DatasetRecord, MeaningRepresentation, Personality, SlotValue, StyleConstraint};
pub use textpipe::{TokenSequence, Vocabulary};

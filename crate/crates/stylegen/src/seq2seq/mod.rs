//! The sequence model: a bidirectional LSTM encoder over slot-value
//! pairs, a unidirectional LSTM decoder with bilinear global attention,
//! and three ways of injecting a style constraint:
//!
//! - Method 1 (token supervision): pseudo slot-value pairs prepended to
//!   the MR, no new model parameters
//! - Method 2 (token features): the constraint vector appended to every
//!   slot-value encoding on the source side
//! - Method 3 (decoder conditioning): the constraint vector appended to
//!   the decoder input at every step
//!
//! plus an unconditioned baseline (`NoCon`).

mod beam;
mod checkpoint;
mod data;
mod lstm;
mod model;
mod train;

pub use beam::{beam_generate, GeneratedSequence};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, sha256_hex, CheckpointError, CheckpointMeta,
    CHECKPOINT_MAGIC,
};
pub use data::{
    build_vocab_set, prepare_example, prepare_source, process_records, PreparedExample,
    ProcessedRecord, VocabSet,
};
pub use model::{apply_method1, attention, BoundModel, Model, SIDE_CONSTRAINT_SLOT};
pub use train::{perplexity, train, EpochStats, TrainOptions, TrainReport};

use serde::{Deserialize, Serialize};

use crate::mr::{Granularity, MrError, StyleConstraint, FINE_PARAM_COUNT, PERSONALITIES};

/// Side-constraint injection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    NoCon,
    M1,
    M2,
    M3,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::NoCon => "nocon",
            Method::M1 => "m1",
            Method::M2 => "m2",
            Method::M3 => "m3",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "nocon" => Some(Method::NoCon),
            "m1" => Some(Method::M1),
            "m2" => Some(Method::M2),
            "m3" => Some(Method::M3),
            _ => None,
        }
    }

    pub const ALL: [Method; 4] = [Method::NoCon, Method::M1, Method::M2, Method::M3];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Hyper-parameters and decoding settings of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub rnn_layers: usize,
    pub rnn_size: usize,
    pub embed_size: usize,
    pub method: Method,
    pub granularity: Granularity,
    pub dropout_p: f64,
    pub beam_width: usize,
    pub batch_size: usize,
    /// Decode-length cap; `None` resolves to twice the longest training
    /// reference when training starts.
    pub max_len: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rnn_layers: 1,
            rnn_size: 150,
            embed_size: 64,
            method: Method::M3,
            granularity: Granularity::Coarse,
            dropout_p: 0.1,
            beam_width: 3,
            batch_size: 128,
            max_len: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        if !(self.rnn_layers == 1 || self.rnn_layers == 2) {
            return Err(Seq2SeqError::InvalidConfig(format!(
                "rnn_layers must be 1 or 2, got {}",
                self.rnn_layers
            )));
        }
        if self.rnn_size == 0 || self.embed_size == 0 {
            return Err(Seq2SeqError::InvalidConfig(
                "rnn_size and embed_size must be positive".into(),
            ));
        }
        if self.beam_width == 0 {
            return Err(Seq2SeqError::InvalidConfig("beam_width must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Seq2SeqError::InvalidConfig(
                "dropout_p must be in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Seq2SeqError::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// The encoded side constraint: a 1-hot over the five personalities,
/// optionally extended with the 36 binary style parameters under fine
/// control, or a single contrast bit. Unconditioned records encode as a
/// zero vector of the model's constraint width.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintVector {
    values: Vec<f64>,
}

impl ConstraintVector {
    pub fn encode(c: &StyleConstraint, granularity: Granularity) -> ConstraintVector {
        let values = match c {
            StyleConstraint::None => Vec::new(),
            StyleConstraint::Personality {
                personality,
                fine_params,
            } => {
                let mut v = vec![0.0; PERSONALITIES.len()];
                v[personality.index()] = 1.0;
                if granularity == Granularity::Fine {
                    let bits = fine_params.unwrap_or([0; FINE_PARAM_COUNT]);
                    v.extend(bits.iter().map(|&b| b as f64));
                }
                v
            }
            StyleConstraint::Contrast { contrast } => vec![if *contrast { 1.0 } else { 0.0 }],
        };
        ConstraintVector { values }
    }

    pub fn zeros(dim: usize) -> ConstraintVector {
        ConstraintVector {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pads or verifies against the model's constraint width.
    pub fn fit(&self, dim: usize) -> Result<ConstraintVector, Seq2SeqError> {
        if self.values.is_empty() {
            return Ok(ConstraintVector::zeros(dim));
        }
        if self.values.len() != dim {
            return Err(Seq2SeqError::ConstraintDim {
                expected: dim,
                got: self.values.len(),
            });
        }
        Ok(self.clone())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Seq2SeqError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("constraint vector has {got} dims, model expects {expected}")]
    ConstraintDim { expected: usize, got: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    DivergedTraining { epoch: usize, batch: usize },
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error(transparent)]
    Mr(#[from] MrError),
}

//! Shared helpers for integration tests.

use std::collections::BTreeSet;

use stylegen::mr::{DatasetRecord, Granularity};
use stylegen::numerics::RngState;
use stylegen::seq2seq::{
    beam_generate, build_vocab_set, prepare_example, prepare_source, process_records, train,
    GeneratedSequence, Method, Model, ModelConfig, PreparedExample, TrainOptions, VocabSet,
};

pub fn delex_default() -> BTreeSet<String> {
    ["name".to_string(), "near".to_string()].into()
}

/// Everything needed to train and decode on one corpus.
pub struct Workbench {
    pub vocabs: VocabSet,
    pub train_set: Vec<PreparedExample>,
    pub dev_set: Vec<PreparedExample>,
    pub max_ref_len: usize,
}

pub fn prepare_corpus(
    train_records: &[DatasetRecord],
    dev_records: &[DatasetRecord],
    method: Method,
    granularity: Granularity,
) -> Workbench {
    let processed_train = process_records(train_records, &delex_default());
    let processed_dev = process_records(dev_records, &delex_default());
    let train_recs: Vec<DatasetRecord> =
        processed_train.iter().map(|p| p.record.clone()).collect();
    let dev_recs: Vec<DatasetRecord> = processed_dev.iter().map(|p| p.record.clone()).collect();
    let vocabs = build_vocab_set(&train_recs, 1);
    let train_set: Vec<PreparedExample> = train_recs
        .iter()
        .map(|r| prepare_example(r, 0, &vocabs, method, granularity).unwrap())
        .collect();
    let dev_set: Vec<PreparedExample> = dev_recs
        .iter()
        .map(|r| prepare_example(r, 0, &vocabs, method, granularity).unwrap())
        .collect();
    let max_ref_len = train_set
        .iter()
        .map(|e| e.target_ids.len())
        .max()
        .unwrap_or(20);
    Workbench {
        vocabs,
        train_set,
        dev_set,
        max_ref_len,
    }
}

/// Knobs for one test training run.
pub struct TrainSpec {
    pub c_dim: usize,
    pub rnn_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            c_dim: 0,
            rnn_size: 24,
            batch_size: 8,
            epochs: 120,
            learning_rate: 1.0,
            lr_decay: 1.0,
            seed: 7,
        }
    }
}

pub fn train_model(
    bench: &Workbench,
    method: Method,
    granularity: Granularity,
    spec: &TrainSpec,
) -> Model {
    let config = ModelConfig {
        rnn_layers: 1,
        rnn_size: spec.rnn_size,
        embed_size: 32,
        method,
        granularity,
        dropout_p: 0.1,
        beam_width: 3,
        batch_size: spec.batch_size,
        max_len: Some(2 * bench.max_ref_len),
    };
    let mut model =
        Model::init(config, bench.vocabs.sizes(), spec.c_dim, RngState::new(spec.seed)).unwrap();
    let opts = TrainOptions {
        max_epochs: spec.epochs,
        learning_rate: spec.learning_rate,
        lr_decay: spec.lr_decay,
        seed: spec.seed,
        ..TrainOptions::default()
    };
    train(&mut model, &bench.train_set, &bench.dev_set, &opts).unwrap();
    model
}

/// Decodes a record's source side and returns the generated tokens.
pub fn generate_tokens(
    model: &Model,
    record: &DatasetRecord,
    vocabs: &VocabSet,
    beam: usize,
) -> GeneratedSequence {
    let (type_ids, value_ids, cvec) = prepare_source(
        &record.mr,
        &record.constraint,
        vocabs,
        model.config.method,
        model.config.granularity,
    )
    .unwrap();
    let max_len = model.config.max_len.unwrap_or(40);
    beam_generate(model, &type_ids, &value_ids, &cvec, beam, max_len).unwrap()
}

pub fn ids_to_tokens(ids: &[u32], vocabs: &VocabSet) -> Vec<String> {
    ids.iter()
        .map(|&id| vocabs.target.decode(id).to_string())
        .collect()
}

//! The train / generate / evaluate / grid commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{
    bleu, contrast_accuracy, contrast_judge, entropy, marker_correlations, ser, MarkerLexicon,
    PolarityTable, SlotAligner, SlotLexicon,
};
use crate::mr::{DatasetRecord, StyleConstraint};
use crate::numerics::RngState;
use crate::seq2seq::{
    beam_generate, load_checkpoint, prepare_example, prepare_source, save_checkpoint, sha256_hex,
    train, CheckpointMeta, Model, PreparedExample, Seq2SeqError, TrainOptions, TrainReport,
    VocabSet,
};
use crate::textpipe::{relexicalize, tokenize, DelexMap, TokenSequence, VocabKind};

use super::config::{RunConfig, TaskKind};
use super::ingest::{load_vocabs, read_processed, read_raw_records, vocab_file_hash};
use super::report::{ExperimentReport, ReportRow};
use super::CliError;

fn prepare_split(
    config: &RunConfig,
    split: &str,
    vocabs: &VocabSet,
) -> Result<Vec<PreparedExample>, CliError> {
    let processed = read_processed(&config.processed_dir().join(format!("{split}.jsonl")))?;
    processed
        .iter()
        .map(|p| {
            prepare_example(
                &p.record,
                0,
                vocabs,
                config.model.method,
                config.model.granularity,
            )
            .map_err(|e| CliError::Data(e.to_string()))
        })
        .collect()
}

fn train_options(config: &RunConfig, quiet: bool) -> TrainOptions {
    TrainOptions {
        max_epochs: config.train.max_epochs,
        learning_rate: config.train.learning_rate,
        clip_norm: Some(config.train.clip_norm),
        lr_decay: config.train.lr_decay,
        seed: config.seed,
        quiet,
    }
}

fn checkpoint_meta(config: &RunConfig) -> Result<CheckpointMeta, CliError> {
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("config_hash".to_string(), config.config_hash());
    for kind in [
        VocabKind::SlotType,
        VocabKind::SlotValue,
        VocabKind::TargetToken,
    ] {
        extra.insert(
            format!("vocab_{}", kind.file_stem()),
            vocab_file_hash(config, kind)?,
        );
    }
    Ok(CheckpointMeta {
        seed: config.seed,
        extra,
    })
}

fn train_one(
    config: &RunConfig,
    vocabs: &VocabSet,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    model_config: crate::seq2seq::ModelConfig,
    quiet: bool,
) -> Result<(Model, TrainReport), CliError> {
    let task = config.task()?;
    let c_dim = task.constraint_dim(model_config.granularity);
    let mut model_config = model_config;
    if model_config.max_len.is_none() {
        let longest = train_set.iter().map(|e| e.target_ids.len()).max().unwrap_or(30);
        model_config.max_len = Some(2 * longest);
    }
    let mut model = Model::init(
        model_config,
        vocabs.sizes(),
        c_dim,
        RngState::new(config.seed),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let report = train(
        &mut model,
        train_set,
        dev_set,
        &train_options(config, quiet),
    )
    .map_err(|e| match e {
        Seq2SeqError::DivergedTraining { .. } => CliError::Diverged(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    Ok((model, report))
}

fn write_train_log(path: &Path, report: &TrainReport) -> Result<(), CliError> {
    let mut log = String::from("epoch\ttrain_ppl\tdev_ppl\tlr\tbest_so_far\n");
    for e in &report.epochs {
        log.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            e.epoch, e.train_perplexity, e.dev_perplexity, e.learning_rate, e.best_so_far
        ));
    }
    log.push_str(&format!(
        "# best epoch {} dev_ppl {:.6}\n",
        report.best_epoch, report.best_dev_perplexity
    ));
    std::fs::write(path, log).map_err(|e| CliError::Data(format!("cannot write log: {e}")))
}

/// Trains the configured model on the processed dataset and saves the
/// best checkpoint plus a per-epoch log.
pub fn cmd_train(config: &RunConfig, quiet: bool) -> Result<TrainReport, CliError> {
    let vocabs = load_vocabs(config)?;
    let train_set = prepare_split(config, "train", &vocabs)?;
    let dev_set = prepare_split(config, "dev", &vocabs)?;
    let (model, report) = train_one(
        config,
        &vocabs,
        &train_set,
        &dev_set,
        config.model.clone(),
        quiet,
    )?;
    std::fs::create_dir_all(config.checkpoint_dir())
        .map_err(|e| CliError::Data(format!("cannot create checkpoint dir: {e}")))?;
    save_checkpoint(&config.checkpoint_path(), &model, &checkpoint_meta(config)?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_train_log(
        &config.checkpoint_dir().join(format!("{}.log.tsv", config.model_label())),
        &report,
    )?;
    Ok(report)
}

/// One grid row: the hyper-parameters and the dev perplexity reached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub rnn_layers: usize,
    pub rnn_size: usize,
    pub best_dev_perplexity: f64,
    pub best_epoch: usize,
}

/// Trains one model per (layers, size) pair, selects the lowest dev
/// perplexity, saves that checkpoint and a grid report.
pub fn cmd_grid(config: &RunConfig, quiet: bool) -> Result<Vec<GridRow>, CliError> {
    let vocabs = load_vocabs(config)?;
    let train_set = prepare_split(config, "train", &vocabs)?;
    let dev_set = prepare_split(config, "dev", &vocabs)?;

    let mut rows = Vec::new();
    let mut best: Option<(f64, Model)> = None;
    for &layers in &config.grid.layers {
        for &size in &config.grid.sizes {
            let mut model_config = config.model.clone();
            model_config.rnn_layers = layers;
            model_config.rnn_size = size;
            let (model, report) = train_one(
                config,
                &vocabs,
                &train_set,
                &dev_set,
                model_config,
                quiet,
            )?;
            rows.push(GridRow {
                rnn_layers: layers,
                rnn_size: size,
                best_dev_perplexity: report.best_dev_perplexity,
                best_epoch: report.best_epoch,
            });
            if best
                .as_ref()
                .map(|(ppl, _)| report.best_dev_perplexity < *ppl)
                .unwrap_or(true)
            {
                best = Some((report.best_dev_perplexity, model));
            }
        }
    }

    let (_, best_model) = best.expect("grid is non-empty");
    std::fs::create_dir_all(config.checkpoint_dir())
        .map_err(|e| CliError::Data(format!("cannot create checkpoint dir: {e}")))?;
    save_checkpoint(
        &config.checkpoint_path(),
        &best_model,
        &checkpoint_meta(config)?,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    let grid_json = rows
        .iter()
        .map(|r| serde_json::to_string(r).expect("grid row"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    std::fs::write(
        config.checkpoint_dir().join(format!("{}.grid.jsonl", config.model_label())),
        grid_json,
    )
    .map_err(|e| CliError::Data(format!("cannot write grid report: {e}")))?;
    Ok(rows)
}

/// Sidecar lineage written next to a generated output file.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct OutputMeta {
    pub config_hash: String,
    pub seed: u64,
    pub checkpoint_hash: String,
    pub test_hash: String,
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Decodes every record of the raw test file with the trained
/// checkpoint, relexicalizes, and writes one surface string per line
/// plus a lineage sidecar.
pub fn cmd_generate(config: &RunConfig, out_path: &Path) -> Result<usize, CliError> {
    let checkpoint_path = config.checkpoint_path();
    let (model, meta) =
        load_checkpoint(&checkpoint_path).map_err(|e| CliError::Data(e.to_string()))?;
    // refuse to decode against vocab files that differ from the ones
    // the checkpoint was trained with
    for kind in [
        VocabKind::SlotType,
        VocabKind::SlotValue,
        VocabKind::TargetToken,
    ] {
        let key = format!("vocab_{}", kind.file_stem());
        let current = vocab_file_hash(config, kind)?;
        if meta.extra.get(&key) != Some(&current) {
            return Err(CliError::Data(format!(
                "checksum mismatch: vocab {} differs from the checkpoint's",
                kind.file_stem()
            )));
        }
    }
    let vocabs = load_vocabs(config)?;
    let records = read_raw_records(&config.paths.test)?;
    let delex = config.delex_slots();

    let mut out = String::new();
    for record in &records {
        let (type_ids, value_ids, cvec) = prepare_source(
            &record.mr,
            &record.constraint,
            &vocabs,
            model.config.method,
            model.config.granularity,
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
        let max_len = model.config.max_len.unwrap_or(60);
        let generated = beam_generate(
            &model,
            &type_ids,
            &value_ids,
            &cvec,
            model.config.beam_width,
            max_len,
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
        let tokens: Vec<String> = generated
            .token_ids
            .iter()
            .map(|&id| vocabs.target.decode(id).to_string())
            .collect();
        let map = DelexMap::from_mr(&record.mr, &delex);
        let surface = relexicalize(&TokenSequence::new(tokens), &map)
            .unwrap_or_else(|_| "<unrealizable>".to_string());
        out.push_str(&surface);
        out.push('\n');
    }
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(out_path, &out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out_path.display())))?;

    let sidecar = OutputMeta {
        config_hash: config.config_hash(),
        seed: meta.seed,
        checkpoint_hash: sha256_hex(
            &std::fs::read(&checkpoint_path)
                .map_err(|e| CliError::Data(format!("cannot hash checkpoint: {e}")))?,
        ),
        test_hash: sha256_hex(
            &std::fs::read(&config.paths.test)
                .map_err(|e| CliError::Data(format!("cannot hash test set: {e}")))?,
        ),
    };
    std::fs::write(
        meta_path(out_path),
        serde_json::to_string_pretty(&sidecar).expect("meta json"),
    )
    .map_err(|e| CliError::Data(format!("cannot write output meta: {e}")))?;
    Ok(records.len())
}

fn load_metric_tables(
    config: &RunConfig,
) -> Result<(SlotAligner, PolarityTable, MarkerLexicon), CliError> {
    let aligner = match &config.metrics.paraphrase_table {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            SlotAligner::new(SlotLexicon::parse(&text).map_err(|e| CliError::Data(e.to_string()))?)
        }
        None => SlotAligner::with_default_table(),
    };
    let polarity = match &config.metrics.polarity_table {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            PolarityTable::parse(&text).map_err(|e| CliError::Data(e.to_string()))?
        }
        None => PolarityTable::default_table().clone(),
    };
    let markers = match &config.metrics.marker_lexicon {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            MarkerLexicon::parse(&text).map_err(|e| CliError::Data(e.to_string()))?
        }
        None => MarkerLexicon::default_lexicon().clone(),
    };
    Ok((aligner, polarity, markers))
}

fn personality_label(record: &DatasetRecord) -> Option<String> {
    match &record.constraint {
        StyleConstraint::Personality { personality, .. } => Some(personality.label().to_string()),
        _ => None,
    }
}

/// Scores an output file against the raw test set and writes the
/// report. Refuses output files whose lineage sidecar does not match
/// the test set being scored.
pub fn cmd_evaluate(
    config: &RunConfig,
    outputs_path: &Path,
    report_name: &str,
) -> Result<ExperimentReport, CliError> {
    let task = config.task()?;
    let records = read_raw_records(&config.paths.test)?;
    let outputs_text = std::fs::read_to_string(outputs_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", outputs_path.display())))?;
    let output_lines: Vec<&str> = outputs_text.lines().collect();
    if output_lines.len() != records.len() {
        return Err(CliError::Data(format!(
            "outputs ({}) and test records ({}) are not aligned",
            output_lines.len(),
            records.len()
        )));
    }

    // lineage check when the sidecar exists
    let sidecar = meta_path(outputs_path);
    if sidecar.exists() {
        let meta: OutputMeta = serde_json::from_str(
            &std::fs::read_to_string(&sidecar)
                .map_err(|e| CliError::Data(format!("cannot read sidecar: {e}")))?,
        )
        .map_err(|e| CliError::Data(format!("bad sidecar: {e}")))?;
        let test_hash = sha256_hex(
            &std::fs::read(&config.paths.test)
                .map_err(|e| CliError::Data(format!("cannot hash test set: {e}")))?,
        );
        if meta.test_hash != test_hash {
            return Err(CliError::Data(
                "checksum mismatch: outputs were generated against a different test set".into(),
            ));
        }
    }

    let (aligner, polarity, markers) = load_metric_tables(config)?;
    let cues: Vec<&str> = config.metrics.contrast_cues.iter().map(|s| s.as_str()).collect();

    let mut tokenized_outputs = Vec::with_capacity(output_lines.len());
    for line in &output_lines {
        tokenized_outputs.push(
            tokenize(line).map_err(|e| CliError::Data(format!("unusable output line: {e}")))?,
        );
    }
    let reference_sets: Vec<Vec<TokenSequence>> = records
        .iter()
        .map(|r| {
            r.references
                .iter()
                .filter_map(|s| tokenize(s).ok())
                .collect()
        })
        .collect();

    let bleu_score = bleu(
        &tokenized_outputs,
        &reference_sets,
        config.metrics.bleu_smoothing,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    let mut counts_total = crate::metrics::SlotErrorCounts::default();
    for (record, tokens) in records.iter().zip(&tokenized_outputs) {
        let (counts, _) = ser(&record.mr, tokens, &aligner);
        counts_total.merge(&counts);
    }
    let ser_rate = counts_total.rate();

    let output_entropy = entropy(&tokenized_outputs).map_err(|e| CliError::Data(e.to_string()))?;
    let all_refs: Vec<TokenSequence> = reference_sets.iter().flatten().cloned().collect();
    let reference_entropy = entropy(&all_refs).map_err(|e| CliError::Data(e.to_string()))?;

    let mut row = ReportRow {
        model: config.model_label(),
        bleu: bleu_score,
        ser: ser_rate,
        entropy: output_entropy,
        agg_corr: None,
        prag_corr: None,
        contrast_accuracy: None,
        contrast_attempts: None,
    };

    match task {
        TaskKind::Personality => {
            let model_side: Vec<(String, TokenSequence)> = records
                .iter()
                .zip(&tokenized_outputs)
                .filter_map(|(r, t)| personality_label(r).map(|l| (l, t.clone())))
                .collect();
            let ref_side: Vec<(String, TokenSequence)> = records
                .iter()
                .zip(&reference_sets)
                .filter_map(|(r, refs)| {
                    personality_label(r).map(|l| (l, refs.first().cloned()))
                })
                .filter_map(|(l, t)| t.map(|t| (l, t)))
                .collect();
            if !model_side.is_empty() {
                let corr = marker_correlations(&model_side, &ref_side, &markers)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                row.agg_corr = Some(corr.aggregation_avg);
                row.prag_corr = Some(corr.pragmatic_avg);
            }
        }
        TaskKind::Contrast => {
            let judgments: Vec<_> = records
                .iter()
                .zip(&tokenized_outputs)
                .map(|(r, t)| contrast_judge(&r.mr, t, &aligner, &polarity, &cues))
                .collect();
            let acc = contrast_accuracy(&judgments);
            row.contrast_accuracy = Some(acc.accuracy);
            row.contrast_attempts = Some(acc.attempts);
        }
    }

    let report = ExperimentReport {
        task,
        config_hash: config.config_hash(),
        seed: config.seed,
        reference_entropy,
        rows: vec![row],
    };
    let report_dir = config.report_dir();
    std::fs::create_dir_all(&report_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", report_dir.display())))?;
    std::fs::write(report_dir.join(format!("{report_name}.txt")), report.to_table())
        .map_err(|e| CliError::Data(format!("cannot write report: {e}")))?;
    std::fs::write(
        report_dir.join(format!("{report_name}.jsonl")),
        report.to_jsonl(),
    )
    .map_err(|e| CliError::Data(format!("cannot write report: {e}")))?;
    Ok(report)
}

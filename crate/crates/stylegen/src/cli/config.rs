//! Run configuration: a TOML file plus flag overrides (flags win).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mr::Granularity;
use crate::seq2seq::{sha256_hex, Method, ModelConfig};

use super::CliError;

/// Which benchmark family a run targets; decides the constraint width
/// and the report schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Personality,
    Contrast,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<TaskKind> {
        match s.to_ascii_lowercase().as_str() {
            "personality" => Some(TaskKind::Personality),
            "contrast" => Some(TaskKind::Contrast),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TaskKind::Personality => "personality",
            TaskKind::Contrast => "contrast",
        }
    }

    /// Width of the constraint vector consumed by methods 2 and 3.
    pub fn constraint_dim(&self, granularity: Granularity) -> usize {
        match (self, granularity) {
            (TaskKind::Personality, Granularity::Coarse) => 5,
            (TaskKind::Personality, Granularity::Fine) => 41,
            (TaskKind::Contrast, _) => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    /// Processed data, vocabularies, checkpoints and reports land here.
    pub work_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            train: "data/train.jsonl".into(),
            dev: "data/dev.jsonl".into(),
            test: "data/test.jsonl".into(),
            work_dir: "runs/default".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            learning_rate: 0.1,
            clip_norm: 5.0,
            lr_decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub delex_slots: Vec<String>,
    pub min_count: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            delex_slots: vec!["name".into(), "near".into()],
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub bleu_smoothing: bool,
    pub contrast_cues: Vec<String>,
    /// Optional table overrides; the compiled-in defaults apply when
    /// absent.
    pub paraphrase_table: Option<PathBuf>,
    pub polarity_table: Option<PathBuf>,
    pub marker_lexicon: Option<PathBuf>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            bleu_smoothing: false,
            contrast_cues: super::super::metrics::DEFAULT_CONTRAST_CUES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            paraphrase_table: None,
            polarity_table: None,
            marker_lexicon: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub layers: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            layers: vec![1, 2],
            sizes: vec![150, 200, 250, 300],
        }
    }
}

/// The complete effective configuration of a run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub task: Option<TaskKind>,
    pub paths: PathsConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ingest: IngestConfig,
    pub metrics: MetricsConfig,
    pub grid: GridConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    pub fn task(&self) -> Result<TaskKind, CliError> {
        self.task
            .ok_or_else(|| CliError::Config("task not set (config `task` or --task)".into()))
    }

    pub fn delex_slots(&self) -> BTreeSet<String> {
        self.ingest.delex_slots.iter().cloned().collect()
    }

    /// Hash of the canonical serialized form; embedded in every
    /// artifact for lineage checks. Paths are excluded so the hash
    /// identifies the experiment, not where it ran.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths = PathsConfig::default();
        let text = toml::to_string(&canonical).expect("config serializes");
        sha256_hex(text.as_bytes())[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.train.learning_rate <= 0.0 || self.train.lr_decay <= 0.0 {
            return Err(CliError::Config(
                "learning_rate and lr_decay must be positive".into(),
            ));
        }
        Ok(())
    }

    // work_dir layout
    pub fn processed_dir(&self) -> PathBuf {
        self.paths.work_dir.join("processed")
    }
    pub fn vocab_dir(&self) -> PathBuf {
        self.paths.work_dir.join("vocab")
    }
    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths.work_dir.join("checkpoints")
    }
    pub fn report_dir(&self) -> PathBuf {
        self.paths.work_dir.join("reports")
    }
    pub fn model_label(&self) -> String {
        format!(
            "{}-{}",
            self.model.method.label(),
            match self.model.granularity {
                Granularity::Coarse => "coarse",
                Granularity::Fine => "fine",
            }
        )
    }
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint_dir()
            .join(format!("{}.ckpt", self.model_label()))
    }
}

/// Flag overrides shared by every subcommand; flags win over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Side-constraint method override.
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Control granularity override.
    #[arg(long, global = true, value_parser = parse_granularity)]
    pub granularity: Option<Granularity>,
    /// Beam width override.
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    /// Task override.
    #[arg(long, global = true, value_parser = parse_task)]
    pub task: Option<TaskKind>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (nocon|m1|m2|m3)"))
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    match s.to_ascii_lowercase().as_str() {
        "coarse" => Ok(Granularity::Coarse),
        "fine" => Ok(Granularity::Fine),
        _ => Err(format!("unknown granularity `{s}` (coarse|fine)")),
    }
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    TaskKind::parse(s).ok_or_else(|| format!("unknown task `{s}` (personality|contrast)"))
}

/// Loads the config file (or defaults) and applies flag overrides.
pub fn effective_config(overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match &overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(method) = overrides.method {
        config.model.method = method;
    }
    if let Some(granularity) = overrides.granularity {
        config.model.granularity = granularity;
    }
    if let Some(beam) = overrides.beam {
        config.model.beam_width = beam;
    }
    if let Some(task) = overrides.task {
        config.task = Some(task);
    }
    config.validate()?;
    Ok(config)
}

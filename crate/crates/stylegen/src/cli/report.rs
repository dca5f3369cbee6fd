//! Experiment report: one row per evaluated model, emitted both as a
//! human-readable table and as line-delimited JSON.

use serde::{Deserialize, Serialize};

use super::config::TaskKind;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub bleu: f64,
    pub ser: f64,
    pub entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agg_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prag_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrast_attempts: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub task: TaskKind,
    pub config_hash: String,
    pub seed: u64,
    /// Entropy of the reference side, the upper target for output
    /// diversity.
    pub reference_entropy: f64,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("task: {}\n", self.task.label()));
        out.push_str(&format!(
            "config: {}  seed: {}\n",
            self.config_hash, self.seed
        ));
        out.push_str(&format!("reference H: {:.2}\n\n", self.reference_entropy));
        match self.task {
            TaskKind::Personality => {
                out.push_str(&format!(
                    "{:<16} {:>7} {:>7} {:>6} {:>6} {:>6}\n",
                    "model", "BLEU", "SER", "H", "AGG", "PRAG"
                ));
                for row in &self.rows {
                    out.push_str(&format!(
                        "{:<16} {:>7.2} {:>7.3} {:>6.2} {:>6.2} {:>6.2}\n",
                        row.model,
                        row.bleu,
                        row.ser,
                        row.entropy,
                        row.agg_corr.unwrap_or(f64::NAN),
                        row.prag_corr.unwrap_or(f64::NAN),
                    ));
                }
            }
            TaskKind::Contrast => {
                out.push_str(&format!(
                    "{:<16} {:>7} {:>7} {:>6} {:>6} {:>9}\n",
                    "model", "BLEU", "SER", "H", "Acc", "Attempts"
                ));
                for row in &self.rows {
                    out.push_str(&format!(
                        "{:<16} {:>7.2} {:>7.3} {:>6.2} {:>6.2} {:>9}\n",
                        row.model,
                        row.bleu,
                        row.ser,
                        row.entropy,
                        row.contrast_accuracy.unwrap_or(f64::NAN),
                        row.contrast_attempts.unwrap_or(0),
                    ));
                }
            }
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut value = serde_json::to_value(row).expect("report row");
            let obj = value.as_object_mut().unwrap();
            obj.insert("task".into(), self.task.label().into());
            obj.insert("config_hash".into(), self.config_hash.clone().into());
            obj.insert("seed".into(), self.seed.into());
            obj.insert(
                "reference_entropy".into(),
                serde_json::json!(self.reference_entropy),
            );
            out.push_str(&serde_json::to_string(&value).expect("report line"));
            out.push('\n');
        }
        out
    }
}

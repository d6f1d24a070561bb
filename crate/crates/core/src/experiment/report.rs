use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::train::EpochRecord;
use crate::model::Variant;

/// Version tag of the JSON report layout.
pub const REPORT_SCHEMA: &str = "htps-metrics/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub split_seed: u64,
    pub init_seed: u64,
    /// Fingerprint of the user split, equal across variants of one trial.
    pub split_hash: String,
    pub status: TrialStatus,
    /// Epoch at which a diverged trial stopped.
    pub diverged_epoch: Option<usize>,
    pub best_epoch: Option<usize>,
    pub best_valid_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub initial_train_loss: Option<f64>,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub curve: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean test MSE over non-diverged trials; `None` when every trial diverged.
    pub mean_test_mse: Option<f64>,
    /// Sample standard deviation (0 for a single trial).
    pub std_test_mse: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
}

impl Aggregate {
    pub fn from_trials(trials: &[TrialReport]) -> Self {
        let values: Vec<f64> = trials.iter().filter_map(|t| t.test_mse).collect();
        let diverged = trials.len() - values.len();
        if values.is_empty() {
            return Aggregate {
                mean_test_mse: None,
                std_test_mse: None,
                completed: 0,
                diverged,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Aggregate {
            mean_test_mse: Some(mean),
            std_test_mse: Some(std),
            completed: values.len(),
            diverged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub variant: Variant,
    pub config: BTreeMap<String, String>,
    /// Parameter count of the trained model.
    pub parameters: usize,
    pub trials: Vec<TrialReport>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub mean_test_mse: Option<f64>,
    pub std_test_mse: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
    pub parameters: usize,
    /// Why the leg did not run, if it did not.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema: String,
    pub config: BTreeMap<String, String>,
    pub source: Option<SourceSummary>,
    pub rows: Vec<AblationRow>,
    pub variants: Vec<MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub checkpoint: String,
    pub n_features: usize,
    pub best_epoch: usize,
    pub valid_mse: f64,
    pub test_mse: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "variant {}  parameters {}", self.variant, self.parameters).unwrap();
        writeln!(s, "{:>5} {:>10} {:>12} {:>12} {:>8}", "trial", "best_epoch", "valid_mse", "test_mse", "status").unwrap();
        for t in &self.trials {
            writeln!(
                s,
                "{:>5} {:>10} {:>12} {:>12} {:>8}",
                t.trial,
                t.best_epoch.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
                fmt_opt(t.best_valid_mse),
                fmt_opt(t.test_mse),
                match t.status {
                    TrialStatus::Ok => "ok",
                    TrialStatus::Diverged => "diverged",
                }
            )
            .unwrap();
        }
        writeln!(
            s,
            "mean test MSE {} +/- {} ({} completed, {} diverged)",
            fmt_opt(self.aggregate.mean_test_mse),
            fmt_opt(self.aggregate.std_test_mse),
            self.aggregate.completed,
            self.aggregate.diverged
        )
        .unwrap();
        s
    }
}

impl AblationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<8} {:>12} {:>10} {:>10} {:>6}  note", "variant", "test_mse", "std", "params", "runs").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<8} {:>12} {:>10} {:>10} {:>6}  {}",
                r.variant.as_str(),
                fmt_opt(r.mean_test_mse),
                fmt_opt(r.std_test_mse),
                r.parameters,
                format!("{}/{}", r.completed, r.completed + r.diverged),
                r.skipped.as_deref().unwrap_or("")
            )
            .unwrap();
        }
        s
    }
}

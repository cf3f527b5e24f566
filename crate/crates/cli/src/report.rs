use std::path::Path;

use serde::{Deserialize, Serialize};
use spectral_bench::eval::CvReport;

use crate::config::{ExperimentConfig, Mode, Preprocessing};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: String,
    pub name: String,
    pub samples: usize,
    pub features: usize,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
}

/// Resolved experiment settings, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: Mode,
    pub preprocessing: Preprocessing,
    pub algorithm: spectral_bench::Algorithm,
    pub grid: Option<spectral_bench::HyperparamGrid>,
    pub search_samples: Option<usize>,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub positive: Option<String>,
}

impl ConfigEcho {
    pub fn new(config: &ExperimentConfig, mode: Mode) -> Self {
        ConfigEcho {
            mode,
            preprocessing: config.preprocessing,
            algorithm: config.algorithm.clone(),
            grid: match mode {
                Mode::Cv => None,
                Mode::NestedCv => config.grid.clone(),
            },
            search_samples: config.search_samples,
            k: config.k,
            seed: config.seed,
            stratified: config.stratified,
            positive: config.positive.clone(),
        }
    }
}

/// Deterministic part of a report: identical for identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub tool_version: String,
    pub config: ConfigEcho,
    pub dataset: DatasetSummary,
    pub results: CvReport,
    pub checkpoint: String,
}

/// Wall-clock data, kept apart from the body so bodies can be diffed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub output_dir: String,
    pub created_unix: u64,
    pub train_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub body: ReportBody,
    pub run: RunInfo,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report serializes")
    }

    pub fn mean_train_seconds(&self) -> f64 {
        let t = &self.run.train_seconds;
        if t.is_empty() {
            0.0
        } else {
            t.iter().sum::<f64>() / t.len() as f64
        }
    }

    /// Read a report, refusing other schema versions before parsing the rest.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(SCHEMA_VERSION)) {
            let found = version.map_or("none".to_string(), |v| v.to_string());
            return Err(CliError::Other(format!(
                "{}: report schema version {found} is not supported (expected {SCHEMA_VERSION})",
                path.display()
            )));
        }
        serde_json::from_value(value).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    }
}

use std::fmt::Write as _;
use std::path::PathBuf;

use spectral_bench::data::format_value;

use crate::error::{CliError, CliResult};
use crate::report::ExperimentReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub dataset: String,
    pub algorithm: String,
    pub preprocessing: String,
    pub mode: String,
    pub accuracy: (f64, f64),
    pub specificity: (Option<f64>, Option<f64>),
    pub sensitivity: (Option<f64>, Option<f64>),
    pub train_seconds: f64,
}

impl ComparisonRow {
    pub fn from_report(r: &ExperimentReport) -> Self {
        let res = &r.body.results;
        let cfg = &r.body.config;
        ComparisonRow {
            dataset: r.body.dataset.name.clone(),
            algorithm: cfg.algorithm.name().to_string(),
            preprocessing: cfg.preprocessing.label(),
            mode: serde_json::to_value(cfg.mode)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            accuracy: (res.mean_accuracy, res.std_accuracy),
            specificity: (res.specificity_mean, res.specificity_std),
            sensitivity: (res.sensitivity_mean, res.sensitivity_std),
            train_seconds: r.mean_train_seconds(),
        }
    }
}

pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(paths: &[PathBuf]) -> CliResult<Comparison> {
    if paths.is_empty() {
        return Err(CliError::Config("compare needs at least one report".into()));
    }
    let rows = paths
        .iter()
        .map(|p| ExperimentReport::load(p).map(|r| ComparisonRow::from_report(&r)))
        .collect::<CliResult<_>>()?;
    Ok(Comparison { rows })
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), format_value)
}

fn pct(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
        (Some(m), None) => format!("{:.2}", 100.0 * m),
        _ => "n/a".into(),
    }
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "dataset,algorithm,preprocessing,mode,accuracy_mean,accuracy_std,specificity_mean,specificity_std,sensitivity_mean,sensitivity_std,train_seconds\n",
        );
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.dataset,
                r.algorithm,
                r.preprocessing,
                r.mode,
                format_value(r.accuracy.0),
                format_value(r.accuracy.1),
                cell(r.specificity.0),
                cell(r.specificity.1),
                cell(r.sensitivity.0),
                cell(r.sensitivity.1),
                format_value(r.train_seconds)
            )
            .unwrap();
        }
        s
    }

    /// Aligned text table with percentages.
    pub fn to_table(&self) -> String {
        let header = ["dataset", "algorithm", "preprocessing", "ACC %", "ESPEC %", "SE %", "train s"];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.dataset.clone(),
                    r.algorithm.clone(),
                    r.preprocessing.clone(),
                    pct(Some(r.accuracy.0), Some(r.accuracy.1)),
                    pct(r.specificity.0, r.specificity.1),
                    pct(r.sensitivity.0, r.sensitivity.1),
                    format!("{:.2}", r.train_seconds),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = line(header.to_vec());
        for row in &body {
            s.push_str(&line(row.iter().map(String::as_str).collect()));
        }
        s
    }
}

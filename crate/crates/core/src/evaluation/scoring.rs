//! Grades a results file against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricName {
    #[serde(rename = "rmse")]
    Rmse,
    #[serde(rename = "f1")]
    F1,
    #[serde(rename = "auroc")]
    Auroc,
    #[serde(rename = "mase")]
    Mase,
    #[serde(rename = "iou")]
    Iou,
    #[serde(rename = "recall@10")]
    RecallAt10,
    #[serde(rename = "r2")]
    R2,
    #[serde(rename = "accuracy")]
    Accuracy,
    #[serde(rename = "s_alpha")]
    SAlpha,
    #[serde(rename = "f1_weighted")]
    F1Weighted,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Rmse => "rmse",
            MetricName::F1 => "f1",
            MetricName::Auroc => "auroc",
            MetricName::Mase => "mase",
            MetricName::Iou => "iou",
            MetricName::RecallAt10 => "recall@10",
            MetricName::R2 => "r2",
            MetricName::Accuracy => "accuracy",
            MetricName::SAlpha => "s_alpha",
            MetricName::F1Weighted => "f1_weighted",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricName::Rmse | MetricName::Mase)
    }
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMetadata {
    pub dataset_name: String,
    pub metric_name: MetricName,
    pub problem_type: String,
    pub label_column: String,
    pub modality: Vec<String>,
}

impl DatasetMetadata {
    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Io(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| ScoreError::Metadata(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid metadata: {0}")]
    Metadata(String),
    #[error("cannot parse table: {0}")]
    Csv(#[from] csv::Error),
    #[error("results extension `{results}` differs from ground truth `{truth}`")]
    ExtensionMismatch { results: String, truth: String },
    #[error("column `{0}` carries a `predicted_` prefix")]
    PredictedPrefix(String),
    #[error("columns {found:?} do not match expected {expected:?}")]
    ColumnMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("results have {found} rows, ground truth has {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("label column `{0}` not found")]
    MissingLabel(String),
    #[error("row {row}: `{value}` is not numeric")]
    NotNumeric { row: usize, value: String },
    #[error("ground truth is empty")]
    Empty,
    #[error("metric `{0}` is not implemented")]
    Unsupported(MetricName),
}

impl ScoreError {
    /// True for errors caused by a non-compliant results file.
    pub fn is_format_failure(&self) -> bool {
        matches!(
            self,
            ScoreError::ExtensionMismatch { .. }
                | ScoreError::PredictedPrefix(_)
                | ScoreError::ColumnMismatch { .. }
                | ScoreError::RowCount { .. }
                | ScoreError::MissingLabel(_)
                | ScoreError::NotNumeric { .. }
        )
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(text: &str, delimiter: u8) -> Result<Table, ScoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(|c| c.trim().to_string()).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { headers, rows })
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default()
}

/// Scores `results` against `truth`; both must share extension and columns.
pub fn score_predictions(results: &Path, truth: &Path, meta: &DatasetMetadata) -> Result<f64, ScoreError> {
    let (re, te) = (extension(results), extension(truth));
    if re != te {
        return Err(ScoreError::ExtensionMismatch { results: re, truth: te });
    }
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| ScoreError::Io(p.to_path_buf(), e));
    let delimiter = if te == "tsv" { b'\t' } else { b',' };
    score_tables(&read(results)?, &read(truth)?, delimiter, meta)
}

/// Rows are compared line by line in order.
pub fn score_tables(results: &str, truth: &str, delimiter: u8, meta: &DatasetMetadata) -> Result<f64, ScoreError> {
    let res = read_table(results, delimiter)?;
    let gt = read_table(truth, delimiter)?;
    if let Some(h) = res.headers.iter().find(|h| h.starts_with("predicted_")) {
        return Err(ScoreError::PredictedPrefix(h.clone()));
    }
    let as_set = |h: &[String]| h.iter().cloned().collect::<BTreeSet<_>>();
    if as_set(&res.headers) != as_set(&gt.headers) {
        return Err(ScoreError::ColumnMismatch {
            expected: gt.headers.clone(),
            found: res.headers.clone(),
        });
    }
    if res.rows.len() != gt.rows.len() {
        return Err(ScoreError::RowCount {
            expected: gt.rows.len(),
            found: res.rows.len(),
        });
    }
    if gt.rows.is_empty() {
        return Err(ScoreError::Empty);
    }
    let col = |t: &Table| -> Result<Vec<String>, ScoreError> {
        let i = t
            .headers
            .iter()
            .position(|h| *h == meta.label_column)
            .ok_or_else(|| ScoreError::MissingLabel(meta.label_column.clone()))?;
        Ok(t.rows.iter().map(|r| r.get(i).cloned().unwrap_or_default()).collect())
    };
    let (pred, truth) = (col(&res)?, col(&gt)?);
    match meta.metric_name {
        MetricName::Rmse => Ok(rmse(&numeric(&pred)?, &numeric(&truth)?)),
        MetricName::R2 => Ok(r2(&numeric(&pred)?, &numeric(&truth)?)),
        MetricName::Accuracy => Ok(accuracy(&pred, &truth)),
        MetricName::F1 => Ok(binary_f1(&pred, &truth)),
        MetricName::F1Weighted => Ok(weighted_f1(&pred, &truth)),
        other => Err(ScoreError::Unsupported(other)),
    }
}

fn numeric(values: &[String]) -> Result<Vec<f64>, ScoreError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.parse::<f64>().map_err(|_| ScoreError::NotNumeric {
                row: i + 2,
                value: v.clone(),
            })
        })
        .collect()
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    (pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n).sqrt()
}

/// Coefficient of determination; a constant truth scores 1 when matched exactly, else 0.
pub fn r2(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let m = truth.iter().sum::<f64>() / n;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Canonical class key: numeric labels compare by value, others by trimmed text.
fn label_key(s: &str) -> String {
    let s = s.trim();
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v}"),
        _ => s.to_string(),
    }
}

pub fn accuracy(pred: &[String], truth: &[String]) -> f64 {
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| label_key(p) == label_key(t))
        .count();
    hits as f64 / truth.len() as f64
}

fn f1_for(class: &str, pred: &[String], truth: &[String]) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        let (p, t) = (label_key(p) == class, label_key(t) == class);
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
}

/// F1 of the positive class: `1`, `true` or `yes` when present, else the greatest label.
pub fn binary_f1(pred: &[String], truth: &[String]) -> f64 {
    let labels: BTreeSet<String> = pred.iter().chain(truth).map(|l| label_key(l)).collect();
    let positive = ["1", "true", "True", "TRUE", "yes", "Yes"]
        .iter()
        .map(|s| s.to_string())
        .find(|s| labels.contains(s))
        .or_else(|| labels.iter().next_back().cloned())
        .unwrap_or_default();
    f1_for(&positive, pred, truth)
}

/// Per-class F1 weighted by ground-truth support.
pub fn weighted_f1(pred: &[String], truth: &[String]) -> f64 {
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    for t in truth {
        *support.entry(label_key(t)).or_default() += 1;
    }
    let n = truth.len() as f64;
    support
        .iter()
        .map(|(class, &s)| f1_for(class, pred, truth) * s as f64 / n)
        .sum()
}

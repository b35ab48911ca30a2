//! Benchmark metrics over per-run records.
//!
//! Success rate, average rank and relative time aggregate (agent, dataset,
//! run) rows; [`medals`] classifies leaderboard scores and [`scoring`] grades a
//! results file against ground truth.

pub mod fixtures;
pub mod medals;
pub mod scoring;

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

pub use medals::{Medal, MedalThresholds, MlebenchResult, MlebenchSummary, classify_medal};
pub use scoring::{DatasetMetadata, MetricName, ScoreError, score_predictions};

/// Runs per (agent, dataset) pair.
pub const RUNS_PER_DATASET: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot read records: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: unknown dataset `{dataset}`")]
    UnknownDataset { row: usize, dataset: String },
    #[error("row {row}: valid flag disagrees with metric presence")]
    Inconsistent { row: usize },
    #[error("row {row}: run index {run} outside 1..=3")]
    BadRun { row: usize, run: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset: String,
    pub metric: String,
    pub higher_is_better: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub agent: String,
    pub dataset: String,
    pub run_index: u32,
    /// Present exactly when the run is valid. Non-negative for lower-is-better metrics.
    pub metric_value: Option<f64>,
    pub higher_is_better: bool,
    pub time_seconds: Option<f64>,
    pub valid: bool,
}

#[derive(Deserialize)]
struct RawRun {
    agent: String,
    dataset: String,
    run: u32,
    value: Option<f64>,
    time: Option<f64>,
    valid: bool,
}

pub fn load_dataset_catalog<R: Read>(reader: R) -> Result<Vec<DatasetInfo>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().collect::<Result<_, _>>().map_err(EvalError::from)
}

/// Reads `agent,dataset,run,value,time,valid` rows.
///
/// Values of lower-is-better datasets are stored as magnitudes, since the
/// source tables print them with inconsistent sign.
pub fn load_run_records<R: Read>(reader: R, catalog: &[DatasetInfo]) -> Result<Vec<RunRecord>, EvalError> {
    let direction: HashMap<&str, bool> = catalog
        .iter()
        .map(|d| (d.dataset.as_str(), d.higher_is_better))
        .collect();
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RawRun>().enumerate() {
        let row = row?;
        let line = i + 2;
        let higher = *direction
            .get(row.dataset.as_str())
            .ok_or_else(|| EvalError::UnknownDataset {
                row: line,
                dataset: row.dataset.clone(),
            })?;
        if row.valid != row.value.is_some() {
            return Err(EvalError::Inconsistent { row: line });
        }
        if !(1..=RUNS_PER_DATASET as u32).contains(&row.run) {
            return Err(EvalError::BadRun {
                row: line,
                run: row.run,
            });
        }
        out.push(RunRecord {
            metric_value: row.value.map(|v| if higher { v } else { v.abs() }),
            agent: row.agent,
            dataset: row.dataset,
            run_index: row.run,
            higher_is_better: higher,
            time_seconds: row.time,
            valid: row.valid,
        });
    }
    Ok(out)
}

/// How agents without a valid result on a dataset are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidRank {
    /// Invalid agents share the bottom positions, tie-averaged.
    #[default]
    TieAveragedBottom,
    /// Every invalid agent receives the last position.
    WorstPosition,
}

impl std::str::FromStr for InvalidRank {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tie_averaged_bottom" | "tie-averaged" | "average" => Ok(Self::TieAveragedBottom),
            "worst_position" | "worst" => Ok(Self::WorstPosition),
            other => Err(format!("unknown invalid-rank convention `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: String,
    pub success_rate: f64,
    pub average_rank: f64,
    pub relative_time: Option<f64>,
}

/// Run records plus the dataset universe they are scored against.
#[derive(Debug, Clone)]
pub struct Benchmark {
    records: Vec<RunRecord>,
    datasets: Vec<DatasetInfo>,
}

const TIE_EPS: f64 = 1e-12;

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl Benchmark {
    pub fn new(records: Vec<RunRecord>, datasets: Vec<DatasetInfo>) -> Self {
        Self { records, datasets }
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn datasets(&self) -> &[DatasetInfo] {
        &self.datasets
    }

    /// Agents in order of first appearance.
    pub fn agents(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for r in &self.records {
            if !seen.contains(&r.agent) {
                seen.push(r.agent.clone());
            }
        }
        seen
    }

    /// Percentage of the |D|·3 dataset-run combinations with a valid result.
    pub fn success_rate(&self, agent: &str) -> f64 {
        let total = self.datasets.len() * RUNS_PER_DATASET;
        if total == 0 {
            return 0.0;
        }
        let mut valid: Vec<(&str, u32)> = self
            .records
            .iter()
            .filter(|r| r.agent == agent && r.valid)
            .map(|r| (r.dataset.as_str(), r.run_index))
            .collect();
        valid.sort_unstable();
        valid.dedup();
        let valid = valid
            .iter()
            .filter(|(d, _)| self.datasets.iter().any(|x| x.dataset == *d))
            .count();
        valid as f64 / total as f64 * 100.0
    }

    fn valid_means<F>(&self, agent: &str, field: F) -> BTreeMap<&str, f64>
    where
        F: Fn(&RunRecord) -> Option<f64>,
    {
        let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.agent == agent && r.valid) {
            if let Some(v) = field(r) {
                grouped.entry(r.dataset.as_str()).or_default().push(v);
            }
        }
        grouped
            .into_iter()
            .filter_map(|(d, v)| mean(&v).map(|m| (d, m)))
            .collect()
    }

    /// Mean metric value over valid runs, per dataset.
    pub fn dataset_scores(&self, agent: &str) -> BTreeMap<&str, f64> {
        self.valid_means(agent, |r| r.metric_value)
    }

    /// Mean over common datasets of the agent's mean valid time over the reference's.
    pub fn relative_time(&self, agent: &str, reference: &str) -> Option<f64> {
        let mine = self.valid_means(agent, |r| r.time_seconds);
        let refs = self.valid_means(reference, |r| r.time_seconds);
        let ratios: Vec<f64> = self
            .datasets
            .iter()
            .filter_map(|d| {
                let a = mine.get(d.dataset.as_str())?;
                let r = refs.get(d.dataset.as_str())?;
                (*r > 0.0).then(|| a / r)
            })
            .collect();
        mean(&ratios)
    }

    /// Direction-aware tie-averaged rank of each agent, averaged over datasets.
    pub fn average_rank(&self, agents: &[String], convention: InvalidRank) -> Vec<(String, f64)> {
        let n = agents.len();
        let mut totals = vec![0.0; n];
        if self.datasets.is_empty() || n == 0 {
            return agents.iter().map(|a| (a.clone(), 0.0)).collect();
        }
        let scores: Vec<BTreeMap<&str, f64>> = agents.iter().map(|a| self.dataset_scores(a)).collect();
        for d in &self.datasets {
            let sign = if d.higher_is_better { 1.0 } else { -1.0 };
            let mut valid: Vec<(usize, f64)> = (0..n)
                .filter_map(|i| scores[i].get(d.dataset.as_str()).map(|s| (i, sign * s)))
                .collect();
            valid.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut start = 0;
            while start < valid.len() {
                let mut end = start;
                while end + 1 < valid.len() && (valid[end + 1].1 - valid[start].1).abs() <= TIE_EPS {
                    end += 1;
                }
                let rank = (start + end) as f64 / 2.0 + 1.0;
                for &(i, _) in &valid[start..=end] {
                    totals[i] += rank;
                }
                start = end + 1;
            }
            let invalid_rank = match convention {
                InvalidRank::TieAveragedBottom => (valid.len() + 1 + n) as f64 / 2.0,
                InvalidRank::WorstPosition => n as f64,
            };
            for (i, total) in totals.iter_mut().enumerate() {
                if !scores[i].contains_key(d.dataset.as_str()) {
                    *total += invalid_rank;
                }
            }
        }
        let count = self.datasets.len() as f64;
        agents.iter().zip(totals).map(|(a, t)| (a.clone(), t / count)).collect()
    }

    pub fn summarize(&self, agents: &[String], reference: &str, convention: InvalidRank) -> Vec<AgentSummary> {
        self.average_rank(agents, convention)
            .into_iter()
            .map(|(agent, average_rank)| AgentSummary {
                success_rate: self.success_rate(&agent),
                relative_time: self.relative_time(&agent, reference),
                agent,
                average_rank,
            })
            .collect()
    }
}

/// Markdown table: Success at one decimal, Avg. Rank and Rel. Time at two.
pub fn format_report(rows: &[AgentSummary]) -> String {
    let mut out = String::from("| Agent | Success (%) | Avg. Rank | Rel. Time |\n|---|---:|---:|---:|\n");
    for r in rows {
        let time = r
            .relative_time
            .map(|t| format!("{t:.2}"))
            .unwrap_or_else(|| "N/A".into());
        out.push_str(&format!(
            "| {} | {:.1} | {:.2} | {} |\n",
            r.agent, r.success_rate, r.average_rank, time
        ));
    }
    out
}

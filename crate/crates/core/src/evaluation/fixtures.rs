//! Embedded benchmark tables.

use super::medals::{MedalThresholds, MlebenchResult, load_results, load_thresholds};
use super::{Benchmark, DatasetInfo, load_dataset_catalog, load_run_records};

pub const MAAB_RUNS_CSV: &str = include_str!("../../fixtures/maab_runs.csv");
pub const MAAB_DATASETS_CSV: &str = include_str!("../../fixtures/maab_datasets.csv");
pub const MLEBENCH_THRESHOLDS_CSV: &str = include_str!("../../fixtures/mlebench_thresholds.csv");
pub const MLEBENCH_RESULTS_CSV: &str = include_str!("../../fixtures/mlebench_results.csv");

/// Reference configuration for relative time.
pub const REFERENCE_AGENT: &str = "mlzero_def";

pub fn maab_datasets() -> Vec<DatasetInfo> {
    load_dataset_catalog(MAAB_DATASETS_CSV.as_bytes()).expect("embedded catalog parses")
}

pub fn maab_benchmark() -> Benchmark {
    let datasets = maab_datasets();
    let records = load_run_records(MAAB_RUNS_CSV.as_bytes(), &datasets).expect("embedded runs parse");
    Benchmark::new(records, datasets)
}

pub fn mlebench_thresholds() -> Vec<MedalThresholds> {
    load_thresholds(MLEBENCH_THRESHOLDS_CSV.as_bytes()).expect("embedded thresholds parse")
}

pub fn mlebench_results() -> Vec<MlebenchResult> {
    load_results(MLEBENCH_RESULTS_CSV.as_bytes()).expect("embedded results parse")
}

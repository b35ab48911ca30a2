//! Browser bindings for the pure parts of the kernel.
//!
//! Every export takes plain values and returns a JSON string; the `*_json`
//! functions hold the logic so they can be tested natively.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use mlagent_core::evaluation::InvalidRank;
use mlagent_core::evaluation::fixtures::{self, REFERENCE_AGENT};
use mlagent_core::evaluation::medals::{MlebenchSummary, classify_medal};
use mlagent_core::perception::{group_files, select_representatives};

#[derive(Serialize)]
struct GroupView {
    pattern: String,
    count: usize,
    representatives: Vec<String>,
    wildcard: bool,
}

/// Groups newline-separated relative paths.
pub fn group_paths_json(paths: &str, delta: usize) -> Result<String, String> {
    let files: Vec<&str> = paths.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let groups = group_files(&files, delta).map_err(|e| e.to_string())?;
    let view: Vec<GroupView> = groups
        .iter()
        .map(|g| GroupView {
            pattern: g.pattern_string(),
            count: g.members.len(),
            representatives: select_representatives(g, delta),
            wildcard: g.folders().iter().any(|f| f == "*"),
        })
        .collect();
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

pub fn competitions_json() -> String {
    serde_json::to_string(&fixtures::mlebench_thresholds()).expect("thresholds serialize")
}

/// Medal for one score on an embedded competition.
pub fn classify_json(id: &str, value: f64) -> Result<String, String> {
    let thresholds = fixtures::mlebench_thresholds();
    let t = thresholds
        .iter()
        .find(|t| t.id == id)
        .ok_or_else(|| format!("unknown competition `{id}`"))?;
    let medal = classify_medal(value, t, false);
    Ok(json!({ "id": id, "name": t.name, "medal": medal, "level": medal.level() }).to_string())
}

pub fn mlebench_summary_json(agent: &str) -> String {
    let s = MlebenchSummary::compute(
        agent,
        &fixtures::mlebench_thresholds(),
        &fixtures::mlebench_results(),
        true,
    );
    serde_json::to_string(&s).expect("summary serializes")
}

pub fn benchmark_json(convention: &str) -> Result<String, String> {
    let convention: InvalidRank = convention.parse()?;
    let bench = fixtures::maab_benchmark();
    let rows = bench.summarize(&bench.agents(), REFERENCE_AGENT, convention);
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn group_paths(paths: &str, delta: usize) -> Result<String, JsError> {
    js(group_paths_json(paths, delta))
}

#[wasm_bindgen]
pub fn competitions() -> String {
    competitions_json()
}

#[wasm_bindgen]
pub fn classify(id: &str, value: f64) -> Result<String, JsError> {
    js(classify_json(id, value))
}

#[wasm_bindgen]
pub fn mlebench_summary(agent: &str) -> String {
    mlebench_summary_json(agent)
}

#[wasm_bindgen]
pub fn benchmark(convention: &str) -> Result<String, JsError> {
    js(benchmark_json(convention))
}

//! Per-run iteration history and the error analyzer.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::EpisodicMode;
use crate::llm::{Gateway, LlmError, RoleSettings};
use crate::parse::find_labeled_fields;
use crate::prompts;
use crate::text::{char_len, truncate_chars, truncate_middle};

pub const ERROR_SUMMARY: &str = "ERROR SUMMARY:";
pub const SUGGESTED_FIX: &str = "SUGGESTED FIX:";

#[derive(Debug, thiserror::Error)]
pub enum EpisodicError {
    #[error("record index {got} does not follow store length {expected}")]
    IndexGap { expected: usize, got: usize },
    #[error("cannot write journal {path}: {source}")]
    Journal { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("error analysis lacks `{0}` after a repair attempt")]
    MissingLabel(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorContext {
    pub error_summary: String,
    /// Dropped in the without-fix ablation.
    pub suggested_fix: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Finish,
    Fix,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IterationPaths {
    pub code: PathBuf,
    pub script: PathBuf,
    pub stdout: PathBuf,
    pub stderr: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub solution_code: String,
    pub shell_script: String,
    pub stdout: String,
    pub stderr: String,
    pub return_code: i32,
    pub wall_seconds: f64,
    pub retrieved_titles: Vec<String>,
    /// Text handed to the analyzer: stderr, or the executer analysis when stderr is empty.
    pub error_message: String,
    pub error_context: Option<ErrorContext>,
    pub executer_analysis: String,
    pub verdict: Verdict,
    pub paths: IterationPaths,
}

/// One line of `episodic.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub t: usize,
    pub code_path: PathBuf,
    pub script_path: PathBuf,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
    pub return_code: i32,
    pub wall_seconds: f64,
    pub retrieved_titles: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub suggested_fix: Option<String>,
    pub executer_analysis: String,
    pub verdict: Verdict,
}

impl From<&IterationRecord> for JournalEntry {
    fn from(r: &IterationRecord) -> Self {
        Self {
            t: r.t,
            code_path: r.paths.code.clone(),
            script_path: r.paths.script.clone(),
            stdout_path: r.paths.stdout.clone(),
            stderr_path: r.paths.stderr.clone(),
            return_code: r.return_code,
            wall_seconds: r.wall_seconds,
            retrieved_titles: r.retrieved_titles.clone(),
            error_summary: r.error_context.as_ref().map(|c| c.error_summary.clone()),
            suggested_fix: r.error_context.as_ref().and_then(|c| c.suggested_fix.clone()),
            executer_analysis: r.executer_analysis.clone(),
            verdict: r.verdict,
        }
    }
}

/// Append-only, contiguously indexed history, optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct EpisodicStore {
    records: Vec<IterationRecord>,
    journal: Option<(PathBuf, File)>,
}

impl EpisodicStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a fresh journal at `path`, replacing any previous one.
    pub fn with_journal(path: &Path) -> Result<Self, EpisodicError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|source| EpisodicError::Journal {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(Self {
            records: Vec::new(),
            journal: Some((path.to_path_buf(), file)),
        })
    }

    pub fn record_iteration(&mut self, record: IterationRecord) -> Result<(), EpisodicError> {
        if record.t != self.records.len() {
            return Err(EpisodicError::IndexGap {
                expected: self.records.len(),
                got: record.t,
            });
        }
        if let Some((path, file)) = &mut self.journal {
            let line = serde_json::to_string(&JournalEntry::from(&record)).expect("journal entry serializes");
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|source| EpisodicError::Journal {
                    path: path.clone(),
                    source,
                })?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|(p, _)| p.as_path())
    }
}

/// Context of the failed iteration handed to the analyzer.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub task_prompt: &'a str,
    pub data_prompt: &'a str,
    pub user_prompt: &'a str,
    pub code: &'a str,
    pub shell_script: &'a str,
    pub retrieved_text: &'a str,
    /// Already middle-truncated.
    pub error_message: &'a str,
}

fn nonempty(fields: &std::collections::BTreeMap<String, String>, label: &str) -> Option<String> {
    fields.get(label).filter(|v| !v.is_empty()).cloned()
}

/// Produces R_t. Returns `None` in modes that bypass the analyzer.
pub fn analyze_error(
    input: &AnalysisInput<'_>,
    mode: EpisodicMode,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<Option<ErrorContext>, EpisodicError> {
    if matches!(mode, EpisodicMode::WithoutBoth | EpisodicMode::MultiTurn) {
        return Ok(None);
    }
    let need_fix = mode == EpisodicMode::Default;
    let labels = [ERROR_SUMMARY, SUGGESTED_FIX];
    let prompt = prompts::error_analysis(
        input.task_prompt,
        input.data_prompt,
        input.user_prompt,
        input.code,
        input.shell_script,
        input.retrieved_text,
        input.error_message,
    );
    let mut attempt = 0;
    loop {
        let text = if attempt == 0 {
            gateway.ask(planner, "error_analyzer", &prompt)?
        } else {
            gateway.ask(
                planner,
                "error_analyzer",
                &format!("{prompt}{}", prompts::format_repair(&labels)),
            )?
        };
        let fields = find_labeled_fields(&text, &labels);
        let summary = nonempty(&fields, ERROR_SUMMARY);
        let fix = nonempty(&fields, SUGGESTED_FIX);
        match (summary, fix) {
            (Some(error_summary), fix) if fix.is_some() || !need_fix => {
                return Ok(Some(ErrorContext {
                    error_summary,
                    suggested_fix: if need_fix { fix } else { None },
                }));
            }
            (summary, _) if attempt > 0 => {
                return Err(EpisodicError::MissingLabel(if summary.is_none() {
                    ERROR_SUMMARY
                } else {
                    SUGGESTED_FIX
                }));
            }
            _ => attempt += 1,
        }
    }
}

/// Error block for the coder prompt of iteration `t`; empty at `t == 0`.
///
/// Every part is capped so the block stays within `cap` plus label overhead.
pub fn error_context_for(store: &EpisodicStore, t: usize, mode: EpisodicMode, cap: usize) -> String {
    if t == 0 {
        return String::new();
    }
    let Some(prev) = store.records().get(t - 1) else {
        return String::new();
    };
    let half = cap / 2;
    match mode {
        EpisodicMode::MultiTurn => String::new(),
        EpisodicMode::WithoutBoth => {
            let analysis = truncate_chars(&prev.executer_analysis, half);
            let error = truncate_middle(&prev.error_message, cap - char_len(&analysis));
            format!("{error}\n\n{analysis}")
        }
        EpisodicMode::Default | EpisodicMode::WithoutFix => match &prev.error_context {
            None => String::new(),
            Some(ctx) => {
                let mut block = format!("{ERROR_SUMMARY} {}", truncate_chars(&ctx.error_summary, half));
                if let (Some(fix), EpisodicMode::Default) = (&ctx.suggested_fix, mode) {
                    block.push_str(&format!("\n\n{SUGGESTED_FIX} {}", truncate_chars(fix, cap - half)));
                }
                block
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;
    use std::sync::Arc;

    fn record(t: usize) -> IterationRecord {
        IterationRecord {
            t,
            solution_code: "print(1)".into(),
            shell_script: "python x.py".into(),
            stdout: String::new(),
            stderr: "Traceback: boom".into(),
            return_code: 1,
            wall_seconds: 0.5,
            retrieved_titles: vec!["Quick start".into()],
            error_message: "Traceback: boom".into(),
            error_context: Some(ErrorContext {
                error_summary: "The script crashed.".into(),
                suggested_fix: Some("Check the path.".into()),
            }),
            executer_analysis: "crashed on load".into(),
            verdict: Verdict::Fix,
            paths: IterationPaths::default(),
        }
    }

    fn input() -> AnalysisInput<'static> {
        AnalysisInput {
            task_prompt: "task",
            data_prompt: "data",
            user_prompt: "",
            code: "code",
            shell_script: "bash",
            retrieved_text: "",
            error_message: "boom",
        }
    }

    #[test]
    fn contiguous_indices() {
        let mut s = EpisodicStore::new();
        s.record_iteration(record(0)).unwrap();
        s.record_iteration(record(1)).unwrap();
        s.record_iteration(record(2)).unwrap();
        assert_eq!(s.len(), 3);
        assert!(matches!(
            s.record_iteration(record(5)),
            Err(EpisodicError::IndexGap { expected: 3, got: 5 })
        ));
        assert!(s.record_iteration(record(1)).is_err());
    }

    #[test]
    fn journal_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episodic.jsonl");
        let mut s = EpisodicStore::with_journal(&path).unwrap();
        s.record_iteration(record(0)).unwrap();
        let first = std::fs::read_to_string(&path).unwrap();
        s.record_iteration(record(1)).unwrap();
        let second = std::fs::read_to_string(&path).unwrap();
        assert!(second.starts_with(&first));
        let entries: Vec<JournalEntry> = second.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].error_summary.as_deref(), Some("The script crashed."));
        let raw: serde_json::Value = serde_json::from_str(second.lines().next().unwrap()).unwrap();
        for key in [
            "t",
            "code_path",
            "script_path",
            "stdout_path",
            "stderr_path",
            "return_code",
            "wall_seconds",
            "retrieved_titles",
            "executer_analysis",
        ] {
            assert!(raw.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn analyzer_parses_either_order() {
        let backend = Arc::new(ScriptedBackend::new([
            "SUGGESTED FIX: Use the right column.\n\nERROR SUMMARY: KeyError on label.",
        ]));
        let ctx = analyze_error(
            &input(),
            EpisodicMode::Default,
            &Gateway::new(backend),
            &RoleSettings::new("planner"),
        )
        .unwrap()
        .unwrap();
        assert_eq!(ctx.error_summary, "KeyError on label.");
        assert_eq!(ctx.suggested_fix.as_deref(), Some("Use the right column."));
    }

    #[test]
    fn analyzer_repairs_once() {
        let backend = Arc::new(ScriptedBackend::new(["it broke", "ERROR SUMMARY: a\nSUGGESTED FIX: b"]));
        let gw = Gateway::new(backend.clone());
        let ctx = analyze_error(&input(), EpisodicMode::Default, &gw, &RoleSettings::new("planner")).unwrap();
        assert!(ctx.is_some());
        assert_eq!(backend.calls_for("error_analyzer"), 2);

        let bad = Arc::new(ScriptedBackend::new(["x", "y"]));
        assert!(matches!(
            analyze_error(
                &input(),
                EpisodicMode::Default,
                &Gateway::new(bad),
                &RoleSettings::new("planner")
            ),
            Err(EpisodicError::MissingLabel(ERROR_SUMMARY))
        ));
    }

    #[test]
    fn ablation_modes() {
        let backend = Arc::new(ScriptedBackend::new(["ERROR SUMMARY: a\nSUGGESTED FIX: b"]));
        let gw = Gateway::new(backend.clone());
        let planner = RoleSettings::new("planner");
        let ctx = analyze_error(&input(), EpisodicMode::WithoutFix, &gw, &planner)
            .unwrap()
            .unwrap();
        assert_eq!(ctx.suggested_fix, None);
        assert_eq!(
            analyze_error(&input(), EpisodicMode::WithoutBoth, &gw, &planner).unwrap(),
            None
        );
        assert_eq!(backend.calls_for("error_analyzer"), 1);
    }

    #[test]
    fn rendered_blocks() {
        let mut s = EpisodicStore::new();
        assert_eq!(error_context_for(&s, 0, EpisodicMode::Default, 2048), "");
        s.record_iteration(record(0)).unwrap();
        assert_eq!(
            error_context_for(&s, 1, EpisodicMode::Default, 2048),
            "ERROR SUMMARY: The script crashed.\n\nSUGGESTED FIX: Check the path."
        );
        let mut no_fix = record(0);
        no_fix.error_context.as_mut().unwrap().suggested_fix = None;
        let mut s2 = EpisodicStore::new();
        s2.record_iteration(no_fix).unwrap();
        let block = error_context_for(&s2, 1, EpisodicMode::WithoutFix, 2048);
        assert_eq!(block, "ERROR SUMMARY: The script crashed.");
        assert_eq!(
            error_context_for(&s, 1, EpisodicMode::WithoutBoth, 2048),
            "Traceback: boom\n\ncrashed on load"
        );
    }

    #[test]
    fn blocks_respect_cap() {
        let mut r = record(0);
        r.error_message = "e".repeat(10_000);
        r.executer_analysis = "a".repeat(5_000);
        r.error_context = Some(ErrorContext {
            error_summary: "s".repeat(5_000),
            suggested_fix: Some("f".repeat(5_000)),
        });
        let mut s = EpisodicStore::new();
        s.record_iteration(r).unwrap();
        let overhead = ERROR_SUMMARY.len() + SUGGESTED_FIX.len() + 4;
        for mode in [
            EpisodicMode::Default,
            EpisodicMode::WithoutFix,
            EpisodicMode::WithoutBoth,
        ] {
            let block = error_context_for(&s, 1, mode, 2048);
            assert!(char_len(&block) <= 2048 + overhead.max(16 + 2), "{mode:?}");
        }
    }
}

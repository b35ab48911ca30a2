//! Turns a raw data folder into a data prompt, a task description and a
//! selected ML library.

pub mod grouping;
pub mod readers;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::{KernelConfig, Role};
use crate::llm::{Gateway, LlmError, RoleSettings};
use crate::parse::find_labeled_fields;
use crate::prompts;
use crate::registry::{FALLBACK_TOOL, ToolSpec};
use crate::sandbox::{Sandbox, SandboxError};
use crate::text::truncate_chars;

pub use grouping::{FileGroup, GroupingError, group_files, select_representatives};
pub use readers::{FilePerceptionReport, ReaderKind, ReaderSettings, perceive_file};

pub const SECTION_SEPARATOR: &str = "----------";

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot list data folder: {0}")]
    Walk(#[from] walkdir::Error),
    #[error("data folder {0} contains no files")]
    EmptyFolder(PathBuf),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("unparseable description-file response: {0}")]
    Unparseable(String),
    #[error("registry is empty or lacks the `{FALLBACK_TOOL}` fallback")]
    NoTool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionContext {
    pub data_root: PathBuf,
    pub data_prompt: String,
    pub task_description: String,
    pub description_files: Vec<PathBuf>,
    pub selected_tool: ToolSpec,
    pub selection_explanation: String,
    pub groups: Vec<FileGroup>,
    pub reports: Vec<FilePerceptionReport>,
}

/// Relative `/`-separated paths of every regular file under `root`, sorted.
pub fn list_files(root: &Path) -> Result<Vec<String>, PerceptionError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        files.push(parts.join("/"));
    }
    files.sort();
    Ok(files)
}

fn abs(root: &Path, rel: &str) -> String {
    root.join(rel).to_string_lossy().into_owned()
}

/// Singleton sections sorted by path, then one section per group larger than `delta`.
pub fn assemble_data_prompt(
    root: &Path,
    groups: &[FileGroup],
    reports: &BTreeMap<String, String>,
    delta: usize,
) -> String {
    let report = |rel: &str| reports.get(rel).map(|r| r.trim_end().to_string()).unwrap_or_default();
    let mut singles: Vec<String> = Vec::new();
    let mut large: Vec<&FileGroup> = Vec::new();
    for g in groups {
        if g.members.len() <= delta {
            singles.extend(g.members.iter().cloned());
        } else {
            large.push(g);
        }
    }
    singles.sort_by_key(|rel| abs(root, rel));
    large.sort_by_key(|g| g.pattern_string());

    let mut out = String::new();
    for rel in &singles {
        out.push_str(&format!(
            "{SECTION_SEPARATOR}\n{}\nContent:\n{}\n",
            abs(root, rel),
            report(rel)
        ));
    }
    for g in large {
        let example = g.example_member();
        out.push_str(&format!(
            "{SECTION_SEPARATOR}\nGroup pattern: {} (total {} files)\nExample file:\n{}\nContent:\n{}\n",
            abs(root, &g.pattern_string()),
            g.members.len(),
            abs(root, example),
            report(example)
        ));
    }
    out.push_str(SECTION_SEPARATOR);
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescriptionFiles {
    pub paths: Vec<PathBuf>,
    pub explanation: String,
    /// Returned paths that do not exist.
    pub dropped: Vec<String>,
}

fn clean_path_line(line: &str) -> &str {
    let mut s = line.trim();
    for prefix in ["- ", "* ", "+ "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest.trim();
        }
    }
    if let Some((num, rest)) = s.split_once(". ")
        && !num.is_empty()
        && num.chars().all(|c| c.is_ascii_digit())
    {
        s = rest.trim();
    }
    s.trim_matches(|c| matches!(c, '`' | '"' | '\'' | '[' | ']' | ','))
}

/// Parses the description-finder response. Relative paths resolve against `root`.
pub fn parse_description_files(response: &str, root: &Path) -> Result<DescriptionFiles, PerceptionError> {
    const FILES: &str = "Description Files:";
    const EXPLANATION: &str = "Explanation:";
    let fields = find_labeled_fields(response, &[FILES, EXPLANATION]);
    if fields.is_empty() {
        return Err(PerceptionError::Unparseable(truncate_chars(response, 200)));
    }
    let mut out = DescriptionFiles {
        explanation: fields.get(EXPLANATION).cloned().unwrap_or_default(),
        ..Default::default()
    };
    for line in fields.get(FILES).map(String::as_str).unwrap_or("").lines() {
        let entry = clean_path_line(line);
        if entry.is_empty() || entry.eq_ignore_ascii_case("none") {
            continue;
        }
        let path = Path::new(entry);
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            root.join(path)
        };
        if path.is_file() {
            if !out.paths.contains(&path) {
                out.paths.push(path);
            }
        } else {
            tracing::warn!(path = entry, "description file does not exist; dropped");
            out.dropped.push(entry.to_string());
        }
    }
    Ok(out)
}

pub fn find_description_files(
    data_prompt: &str,
    root: &Path,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<DescriptionFiles, PerceptionError> {
    let response = gateway.ask(
        planner,
        "description_finder",
        &prompts::find_description_files(data_prompt),
    )?;
    parse_description_files(&response, root)
}

/// Completion returned verbatim.
pub fn generate_task_description(
    data_prompt: &str,
    found: &DescriptionFiles,
    max_chars: usize,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<String, PerceptionError> {
    let mut contents = Vec::new();
    for path in &found.paths {
        let bytes = std::fs::read(path).map_err(|source| PerceptionError::Io {
            path: path.clone(),
            source,
        })?;
        contents.push((
            path.to_string_lossy().into_owned(),
            truncate_chars(&String::from_utf8_lossy(&bytes), max_chars),
        ));
    }
    let prompt = prompts::task_description(
        data_prompt,
        &found.explanation,
        &prompts::description_context(&contents),
    );
    Ok(gateway.ask(planner, "task_describer", &prompt)?)
}

/// Exact name, then case-insensitive, then the longest name contained in the
/// answer (or containing it), then the fallback entry.
pub fn resolve_tool<'a>(answer: &str, registry: &'a [ToolSpec]) -> Option<&'a ToolSpec> {
    if registry.len() == 1 {
        return registry.first();
    }
    let answer = answer.trim();
    if let Some(t) = registry.iter().find(|t| t.name == answer) {
        return Some(t);
    }
    if let Some(t) = registry.iter().find(|t| t.name.eq_ignore_ascii_case(answer)) {
        return Some(t);
    }
    let lower = answer.to_lowercase();
    let by_substring = registry
        .iter()
        .filter(|t| {
            let name = t.name.to_lowercase();
            !lower.is_empty() && (lower.contains(&name) || name.contains(&lower))
        })
        .max_by_key(|t| t.name.len());
    by_substring.or_else(|| registry.iter().find(|t| t.name == FALLBACK_TOOL))
}

pub fn select_library(
    data_prompt: &str,
    task_description: &str,
    registry: &[ToolSpec],
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<(ToolSpec, String), PerceptionError> {
    if registry.is_empty() {
        return Err(PerceptionError::NoTool);
    }
    let prompt = prompts::library_selection(data_prompt, task_description, registry);
    let response = gateway.ask(planner, "tool_selector", &prompt)?;
    let fields = find_labeled_fields(&response, &["Selected Tool:", "Explanation:"]);
    let answer = fields
        .get("Selected Tool:")
        .map(|v| v.lines().next().unwrap_or("").to_string())
        .unwrap_or_default();
    let tool = resolve_tool(&answer, registry).ok_or(PerceptionError::NoTool)?;
    if tool.name != answer.trim() {
        tracing::info!(answer = %answer, resolved = %tool.name, "library answer resolved");
    }
    Ok((tool.clone(), fields.get("Explanation:").cloned().unwrap_or_default()))
}

pub fn reader_settings(cfg: &KernelConfig) -> ReaderSettings {
    ReaderSettings {
        max_chars: cfg.max_chars_per_file,
        details: cfg.file_reader_details(),
        always_generate: cfg.perception.always_generate_readers,
        timeout: Duration::from_secs(cfg.perception.reader_timeout),
        python: cfg.sandbox.python.clone(),
        role: cfg.role(Role::FileReader),
    }
}

/// Full perception pass over `data_dir`.
pub fn perceive(
    data_dir: &Path,
    cfg: &KernelConfig,
    registry: &[ToolSpec],
    gateway: &Gateway,
    sandbox: &Sandbox,
) -> Result<PerceptionContext, PerceptionError> {
    let root = data_dir.canonicalize().map_err(|source| PerceptionError::Io {
        path: data_dir.to_path_buf(),
        source,
    })?;
    let files = list_files(&root)?;
    if files.is_empty() {
        return Err(PerceptionError::EmptyFolder(root));
    }
    let delta = cfg.perception.delta;
    let groups = group_files(&files, delta)?;
    let settings = reader_settings(cfg);

    let mut reports = Vec::new();
    let mut texts = BTreeMap::new();
    for group in &groups {
        for rel in select_representatives(group, delta) {
            let report = perceive_file(&root.join(&rel), reports.len(), &settings, gateway, sandbox)?;
            texts.insert(rel, report.report_text.clone());
            reports.push(report);
        }
    }
    let data_prompt = assemble_data_prompt(&root, &groups, &texts, delta);

    let planner = cfg.role(Role::Planner);
    let found = find_description_files(&data_prompt, &root, gateway, &planner)?;
    let task_description = generate_task_description(&data_prompt, &found, cfg.max_chars_per_file, gateway, &planner)?;
    let (selected_tool, selection_explanation) =
        select_library(&data_prompt, &task_description, registry, gateway, &planner)?;

    Ok(PerceptionContext {
        data_root: root,
        data_prompt,
        task_description,
        description_files: found.paths,
        selected_tool,
        selection_explanation,
        groups,
        reports,
    })
}

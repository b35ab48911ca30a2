//! Knowledge base of condensed tutorials and LLM-driven retrieval.
//!
//! Documents live on disk as `<kb>/<tool>/<slug>.md`: a `TITLE:` line, a
//! `SUMMARY:` line, a blank line, then the condensed body.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::{IndexMode, KernelConfig};
use crate::llm::{Gateway, LlmError, RoleSettings};
use crate::prompts;
use crate::text::{char_len, truncate_chars, truncate_words};

pub const SUMMARY_PREFIX: &str = "Summary: ";
pub const MAX_SUMMARY_WORDS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("summary does not start with \"Summary: \": {0}")]
    BadSummary(String),
    #[error("tutorial `{0}` is empty")]
    EmptyTutorial(String),
    #[error("retrieval answer contains no tutorial number: {0}")]
    NoIndices(String),
    #[error("malformed knowledge document {0}")]
    Malformed(PathBuf),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SemanticError + '_ {
    move |source| SemanticError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDocument {
    pub tool_name: String,
    pub title: String,
    pub summary: String,
    pub condensed_body: String,
    pub source_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KbSettings {
    pub chunk_size: usize,
    pub max_tutorial_length: usize,
    pub condense: bool,
}

impl KbSettings {
    pub fn from_config(cfg: &KernelConfig) -> Self {
        Self {
            chunk_size: cfg.semantic_memory.chunk_size,
            max_tutorial_length: cfg.max_tutorial_length,
            condense: cfg.condense_tutorials,
        }
    }
}

/// Splits at blank lines into chunks of at most `chunk_size` characters;
/// a single over-long paragraph is hard-split.
pub fn split_chunks(text: &str, chunk_size: usize) -> Vec<String> {
    let chunk_size = chunk_size.max(1);
    let mut chunks = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, chunks: &mut Vec<String>| {
        if !current.trim().is_empty() {
            chunks.push(std::mem::take(current));
        }
        current.clear();
    };
    for para in text.split("\n\n") {
        let sep = if current.is_empty() { 0 } else { 2 };
        if char_len(&current) + sep + char_len(para) <= chunk_size {
            if sep > 0 {
                current.push_str("\n\n");
            }
            current.push_str(para);
            continue;
        }
        flush(&mut current, &mut chunks);
        let mut rest: &str = para;
        while char_len(rest) > chunk_size {
            let head = truncate_chars(rest, chunk_size);
            rest = &rest[head.len()..];
            chunks.push(head);
        }
        current.push_str(rest);
    }
    flush(&mut current, &mut chunks);
    chunks
}

/// Cuts before the last heading line at which the preceding text fits in
/// `max_len` characters; hard-cuts when no heading fits.
pub fn truncate_at_section_boundary(text: &str, max_len: usize) -> String {
    if char_len(text) <= max_len {
        return text.to_string();
    }
    let mut best = None;
    let mut chars_before = 0usize;
    let mut byte = 0usize;
    for line in text.split_inclusive('\n') {
        if byte > 0 && line.starts_with('#') {
            if chars_before <= max_len {
                best = Some(byte);
            } else {
                break;
            }
        }
        chars_before += char_len(line);
        byte += line.len();
    }
    match best {
        Some(b) => text[..b].to_string(),
        None => truncate_chars(text, max_len),
    }
}

/// First markdown heading, else the file stem.
pub fn extract_title(text: &str, source: &Path) -> String {
    text.lines()
        .find_map(|l| {
            let t = l.trim_start();
            t.starts_with('#').then(|| t.trim_start_matches('#').trim().to_string())
        })
        .filter(|t| !t.is_empty())
        .unwrap_or_else(|| {
            source
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "untitled".into())
        })
}

fn summary_ok(text: &str) -> bool {
    text.trim_start().starts_with(SUMMARY_PREFIX)
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn summarize(condensed: &str, gateway: &Gateway, planner: &RoleSettings) -> Result<String, SemanticError> {
    let prompt = prompts::summarization(condensed);
    let mut answer = gateway.ask(planner, "summarizer", &prompt)?;
    if !summary_ok(&answer) {
        answer = gateway.ask(planner, "summarizer", &format!("{prompt}{}", prompts::SUMMARY_REPAIR))?;
    }
    if !summary_ok(&answer) {
        return Err(SemanticError::BadSummary(truncate_chars(&answer, 200)));
    }
    Ok(truncate_words(&one_line(&answer), MAX_SUMMARY_WORDS))
}

pub fn build_knowledge_document(
    raw_tutorial: &str,
    title: &str,
    tool_name: &str,
    source_path: &Path,
    settings: KbSettings,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<KnowledgeDocument, SemanticError> {
    if raw_tutorial.trim().is_empty() {
        return Err(SemanticError::EmptyTutorial(title.to_string()));
    }
    let body = if settings.condense {
        let chunks = split_chunks(raw_tutorial, settings.chunk_size);
        let mut condensed = Vec::with_capacity(chunks.len());
        for (i, chunk) in chunks.iter().enumerate() {
            let prompt = prompts::condensation(chunk, i, chunks.len());
            condensed.push(gateway.ask(planner, "condenser", &prompt)?);
        }
        condensed.join("\n\n")
    } else {
        raw_tutorial.to_string()
    };
    let condensed_body = truncate_at_section_boundary(&body, settings.max_tutorial_length);
    let summary = summarize(&condensed_body, gateway, planner)?;
    Ok(KnowledgeDocument {
        tool_name: tool_name.to_string(),
        title: title.to_string(),
        summary,
        condensed_body,
        source_path: source_path.to_path_buf(),
    })
}

pub fn slugify(title: &str) -> String {
    let mut slug = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.ends_with('-') && !slug.is_empty() {
            slug.push('-');
        }
    }
    let slug = slug.trim_end_matches('-').to_string();
    if slug.is_empty() { "doc".into() } else { slug }
}

pub fn render_document(doc: &KnowledgeDocument) -> String {
    format!(
        "TITLE: {}\nSUMMARY: {}\n\n{}",
        one_line(&doc.title),
        doc.summary,
        doc.condensed_body
    )
}

pub fn parse_document(text: &str, tool_name: &str, path: &Path) -> Result<KnowledgeDocument, SemanticError> {
    let malformed = || SemanticError::Malformed(path.to_path_buf());
    let (title_line, rest) = text.split_once('\n').ok_or_else(malformed)?;
    let (summary_line, rest) = rest.split_once('\n').ok_or_else(malformed)?;
    let body = rest.strip_prefix('\n').ok_or_else(malformed)?;
    Ok(KnowledgeDocument {
        tool_name: tool_name.to_string(),
        title: title_line.strip_prefix("TITLE: ").ok_or_else(malformed)?.to_string(),
        summary: summary_line
            .strip_prefix("SUMMARY: ")
            .ok_or_else(malformed)?
            .to_string(),
        condensed_body: body.to_string(),
        source_path: path.to_path_buf(),
    })
}

/// Writes `doc` under `<kb_root>/<tool>/`, picking a free slug.
pub fn save_document(doc: &KnowledgeDocument, kb_root: &Path) -> Result<PathBuf, SemanticError> {
    let dir = kb_root.join(&doc.tool_name);
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let base = slugify(&doc.title);
    let mut path = dir.join(format!("{base}.md"));
    let mut n = 2;
    while path.exists() {
        path = dir.join(format!("{base}-{n}.md"));
        n += 1;
    }
    std::fs::write(&path, render_document(doc)).map_err(io(&path))?;
    Ok(path)
}

/// Documents of one tool, in file-name order. A missing directory is an empty KB.
pub fn load_knowledge_base(kb_root: &Path, tool_name: &str) -> Result<Vec<KnowledgeDocument>, SemanticError> {
    let dir = kb_root.join(tool_name);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(io(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "md"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(io(p))?;
            parse_document(&text, tool_name, p)
        })
        .collect()
}

const TUTORIAL_EXTENSIONS: &[&str] = &["md", "markdown", "txt", "rst"];

/// Condenses and summarizes every tutorial under `src`, saving to `<out>/<tool>/`.
pub fn build_knowledge_base(
    src: &Path,
    tool_name: &str,
    out: &Path,
    settings: KbSettings,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<Vec<(KnowledgeDocument, PathBuf)>, SemanticError> {
    let mut sources: Vec<PathBuf> = walkdir::WalkDir::new(src)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .is_some_and(|e| TUTORIAL_EXTENSIONS.contains(&e.to_string_lossy().to_lowercase().as_str()))
        })
        .collect();
    sources.sort();
    let mut built = Vec::new();
    for path in sources {
        let raw = std::fs::read_to_string(&path).map_err(io(&path))?;
        if raw.trim().is_empty() {
            tracing::warn!(path = %path.display(), "skipping empty tutorial");
            continue;
        }
        let title = extract_title(&raw, &path);
        let doc = build_knowledge_document(&raw, &title, tool_name, &path, settings, gateway, planner)?;
        let saved = save_document(&doc, out)?;
        built.push((doc, saved));
    }
    Ok(built)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalQuery<'a> {
    pub task_prompt: &'a str,
    pub data_prompt: &'a str,
    pub user_prompt: &'a str,
    pub error_prompt: &'a str,
    pub max_num_tutorials: usize,
}

pub fn tutorials_info(kb: &[KnowledgeDocument], mode: IndexMode) -> String {
    kb.iter()
        .enumerate()
        .map(|(i, d)| match mode {
            IndexMode::BySummary => format!("{}. {}\n{}", i + 1, d.title, d.summary),
            IndexMode::ByTitleOnly => format!("{}. {}", i + 1, d.title),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("valid regex"));

/// Zero-based indices in answer order, deduplicated and capped at `k`, plus
/// the out-of-range numbers that were dropped.
pub fn parse_indices(answer: &str, kb_len: usize, k: usize) -> Result<(Vec<usize>, Vec<u64>), SemanticError> {
    let numbers: Vec<u64> = NUMBER
        .find_iter(answer)
        .filter_map(|m| m.as_str().parse().ok())
        .collect();
    if numbers.is_empty() {
        return Err(SemanticError::NoIndices(truncate_chars(answer, 200)));
    }
    let mut picked = Vec::new();
    let mut dropped = Vec::new();
    for n in numbers {
        if n == 0 || n as usize > kb_len {
            tracing::warn!(index = n, kb_len, "retrieved tutorial index out of range");
            dropped.push(n);
            continue;
        }
        let i = n as usize - 1;
        if !picked.contains(&i) && picked.len() < k {
            picked.push(i);
        }
    }
    Ok((picked, dropped))
}

pub fn retrieve_documents(
    query: &RetrievalQuery<'_>,
    kb: &[KnowledgeDocument],
    mode: IndexMode,
    gateway: &Gateway,
    planner: &RoleSettings,
) -> Result<Vec<KnowledgeDocument>, SemanticError> {
    if kb.is_empty() || query.max_num_tutorials == 0 {
        return Ok(Vec::new());
    }
    let prompt = prompts::retrieval(
        query.task_prompt,
        query.data_prompt,
        query.user_prompt,
        query.error_prompt,
        &tutorials_info(kb, mode),
        query.max_num_tutorials,
    );
    let answer = gateway.ask(planner, "retriever", &prompt)?;
    let (picked, _) = parse_indices(&answer, kb.len(), query.max_num_tutorials)?;
    Ok(picked.into_iter().map(|i| kb[i].clone()).collect())
}

/// Block injected into coder prompts.
pub fn render_retrieved(docs: &[KnowledgeDocument]) -> String {
    let pairs: Vec<(&str, &str)> = docs
        .iter()
        .map(|d| (d.title.as_str(), d.condensed_body.as_str()))
        .collect();
    prompts::retrieved_documents(&pairs)
}

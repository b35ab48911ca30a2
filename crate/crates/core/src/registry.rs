//! Registry of wrapped ML libraries.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Generic entry every registry must carry.
pub const FALLBACK_TOOL: &str = "machine learning";

pub const DEFAULT_REGISTRY_JSON: &str = include_str!("../assets/tool_registry.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub version: String,
    pub description: String,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default)]
    pub requirements: Vec<String>,
    #[serde(default)]
    pub prompt_template: Vec<String>,
}

impl ToolSpec {
    /// Library-specific addendum injected into the coder prompt.
    pub fn tool_prompt(&self) -> String {
        self.prompt_template.join("\n")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid registry JSON: {0}")]
    Json(String),
    #[error("registry is empty")]
    Empty,
    #[error("duplicate tool name `{0}`")]
    Duplicate(String),
    #[error("registry lacks the `{FALLBACK_TOOL}` fallback entry")]
    MissingFallback,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RegistryFile {
    Many(Vec<ToolSpec>),
    One(ToolSpec),
}

pub fn default_registry() -> Vec<ToolSpec> {
    parse_tool_registry(DEFAULT_REGISTRY_JSON).expect("shipped registry is valid")
}

pub fn parse_tool_registry(json: &str) -> Result<Vec<ToolSpec>, RegistryError> {
    let tools = match serde_json::from_str(json).map_err(|e| RegistryError::Json(e.to_string()))? {
        RegistryFile::Many(v) => v,
        RegistryFile::One(t) => vec![t],
    };
    validate_registry(&tools)?;
    Ok(tools)
}

/// Loads a JSON file holding a list of records, or a directory of
/// single-record `*.json` files read in name order.
pub fn load_tool_registry(path: &Path) -> Result<Vec<ToolSpec>, RegistryError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| RegistryError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    if !path.is_dir() {
        return parse_tool_registry(&read(path)?);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|source| RegistryError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut tools = Vec::new();
    for file in files {
        match serde_json::from_str(&read(&file)?).map_err(|e| RegistryError::Json(e.to_string()))? {
            RegistryFile::Many(v) => tools.extend(v),
            RegistryFile::One(t) => tools.push(t),
        }
    }
    validate_registry(&tools)?;
    Ok(tools)
}

pub fn validate_registry(tools: &[ToolSpec]) -> Result<(), RegistryError> {
    if tools.is_empty() {
        return Err(RegistryError::Empty);
    }
    let mut seen = HashSet::new();
    for tool in tools {
        if !seen.insert(tool.name.as_str()) {
            return Err(RegistryError::Duplicate(tool.name.clone()));
        }
    }
    if !seen.contains(FALLBACK_TOOL) {
        return Err(RegistryError::MissingFallback);
    }
    Ok(())
}

pub fn find_tool<'a>(tools: &'a [ToolSpec], name: &str) -> Option<&'a ToolSpec> {
    tools.iter().find(|t| t.name == name)
}

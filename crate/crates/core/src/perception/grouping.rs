//! Two-pass file grouping by folder structure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GroupingError {
    #[error("path `{0}` has no filename component")]
    NoFilename(String),
    #[error("delta must be at least 1")]
    ZeroDelta,
}

/// Files sharing one folder pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileGroup {
    /// Folder components (literal or `*`) followed by the extension token, e.g. `[a, *, .csv]`.
    pub pattern: Vec<String>,
    /// Relative `/`-separated paths, sorted.
    pub members: Vec<String>,
}

impl FileGroup {
    pub fn folders(&self) -> &[String] {
        &self.pattern[..self.pattern.len() - 1]
    }

    pub fn extension(&self) -> &str {
        &self.pattern[self.pattern.len() - 1]
    }

    /// `a/*/*.csv` style display form.
    pub fn pattern_string(&self) -> String {
        let mut out = String::new();
        for f in self.folders() {
            out.push_str(f);
            out.push('/');
        }
        out.push('*');
        out.push_str(self.extension());
        out
    }

    /// Lexicographically smallest member.
    pub fn example_member(&self) -> &str {
        self.members.iter().min().map(String::as_str).unwrap_or("")
    }

    pub fn matches(&self, path: &str) -> bool {
        let parts: Vec<&str> = path.split('/').collect();
        let folders = self.folders();
        parts.len() == folders.len() + 1
            && folders.iter().zip(&parts).all(|(p, c)| p == "*" || p == c)
            && extension_token(parts[parts.len() - 1]) == self.extension()
    }
}

/// Extension with its leading dot; empty for dotfiles and names without one.
pub fn extension_token(file_name: &str) -> String {
    Path::new(file_name)
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default()
}

fn split(path: &str) -> Result<Vec<&str>, GroupingError> {
    let parts: Vec<&str> = path.split('/').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(GroupingError::NoFilename(path.to_string()));
    }
    Ok(parts)
}

/// Groups relative paths: a depth keeps its literal folder name when at most
/// `delta` distinct names occur there, otherwise it becomes `*`.
pub fn group_files<S: AsRef<str>>(files: &[S], delta: usize) -> Result<Vec<FileGroup>, GroupingError> {
    if delta == 0 {
        return Err(GroupingError::ZeroDelta);
    }
    let split_files = files
        .iter()
        .map(|f| split(f.as_ref()).map(|p| (f.as_ref(), p)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut names_at: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for (_, parts) in &split_files {
        for (depth, name) in parts[..parts.len() - 1].iter().enumerate() {
            names_at.entry(depth).or_default().insert(name);
        }
    }

    let mut buckets: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    for (path, parts) in &split_files {
        let mut pattern: Vec<String> = parts[..parts.len() - 1]
            .iter()
            .enumerate()
            .map(|(depth, name)| {
                if names_at[&depth].len() <= delta {
                    name.to_string()
                } else {
                    "*".to_string()
                }
            })
            .collect();
        pattern.push(extension_token(parts[parts.len() - 1]));
        buckets.entry(pattern).or_default().insert(path.to_string());
    }

    let mut groups: Vec<FileGroup> = buckets
        .into_iter()
        .map(|(pattern, members)| FileGroup {
            pattern,
            members: members.into_iter().collect(),
        })
        .collect();
    groups.sort_by_cached_key(FileGroup::pattern_string);
    Ok(groups)
}

/// All members of small groups, else the single smallest member.
pub fn select_representatives(group: &FileGroup, delta: usize) -> Vec<String> {
    if group.members.len() <= delta {
        group.members.clone()
    } else {
        vec![group.example_member().to_string()]
    }
}

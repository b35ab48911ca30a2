//! Parsers for the response contracts stated in agent prompts.

use std::collections::BTreeMap;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no fenced block tagged `{0}` found")]
    NoFencedBlock(String),
    #[error("required label `{0}` absent from response")]
    MissingLabel(String),
}

/// Returns the body of the last fenced block whose opening fence carries `tag`.
///
/// Leading and trailing newlines of the body are trimmed. A block left open at
/// the end of the text still counts.
pub fn extract_fenced_block(text: &str, tag: &str) -> Result<String, ParseError> {
    let tag = tag.to_ascii_lowercase();
    let mut last: Option<String> = None;
    // (fence width, tag matches, collected lines)
    let mut open: Option<(usize, bool, Vec<&str>)> = None;

    for line in text.lines() {
        let trimmed = line.trim_start();
        let ticks = trimmed.chars().take_while(|&c| c == '`').count();
        match open.as_mut() {
            None => {
                if ticks >= 3 {
                    let info = trimmed[ticks..].trim().to_ascii_lowercase();
                    let lang = info.split_whitespace().next().unwrap_or("");
                    open = Some((ticks, lang == tag, Vec::new()));
                }
            }
            Some((width, matches, body)) => {
                if ticks >= *width && trimmed[ticks..].trim().is_empty() {
                    if *matches {
                        last = Some(join_block(body));
                    }
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    if let Some((_, true, body)) = open {
        last = Some(join_block(&body));
    }
    last.ok_or(ParseError::NoFencedBlock(tag))
}

fn join_block(lines: &[&str]) -> String {
    lines.join("\n").trim_matches(|c| c == '\n' || c == '\r').to_string()
}

fn label_regex(label: &str, anchored: bool) -> Regex {
    let label = label.trim();
    let (body, colon) = match label.strip_suffix(':') {
        Some(body) => (body.trim_end(), true),
        None => (label, false),
    };
    let mut pattern = String::from("(?i)");
    if anchored {
        pattern.push_str(r"(?m)^[ \t]*(?:(?:[-*+>#]+|\d+[.)])[ \t]*)*");
    }
    pattern.push_str(r"(?:\*\*|__)?");
    pattern.push_str(&regex::escape(body).replace(' ', r"[ \t]+"));
    if colon {
        pattern.push_str(r"(?:\*\*|__)?[ \t]*:");
    }
    pattern.push_str(r"(?:\*\*|__)?");
    Regex::new(&pattern).expect("label pattern is valid")
}

/// Locates each label (case-insensitive, line-start preferred) and captures the
/// text up to the next located label or the end of input.
///
/// Labels that do not occur are absent from the returned map. Values are
/// trimmed and lose one pair of wrapping square brackets.
pub fn find_labeled_fields(text: &str, labels: &[&str]) -> BTreeMap<String, String> {
    let mut spans: Vec<(&str, usize, usize)> = Vec::new();
    for &label in labels {
        let found = label_regex(label, true)
            .find(text)
            .or_else(|| label_regex(label, false).find(text));
        if let Some(m) = found {
            spans.push((label, m.start(), m.end()));
        }
    }
    let mut out = BTreeMap::new();
    for &(label, start, end) in &spans {
        let stop = spans
            .iter()
            .filter(|&&(_, s, _)| s > start && s >= end)
            .map(|&(_, s, _)| s)
            .min()
            .unwrap_or(text.len());
        out.insert(label.to_string(), clean_value(&text[end..stop]));
    }
    out
}

/// Like [`find_labeled_fields`] but every label is required.
pub fn parse_labeled_fields(text: &str, labels: &[&str]) -> Result<BTreeMap<String, String>, ParseError> {
    let fields = find_labeled_fields(text, labels);
    for &label in labels {
        if !fields.contains_key(label) {
            return Err(ParseError::MissingLabel(label.to_string()));
        }
    }
    Ok(fields)
}

fn clean_value(raw: &str) -> String {
    let mut value = raw.trim();
    value = value.trim_start_matches("**").trim_end_matches("**").trim();
    if value.starts_with('[') && value.ends_with(']') && value.len() >= 2 {
        value = value[1..value.len() - 1].trim();
    }
    value.to_string()
}

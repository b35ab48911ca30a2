//! File perception: builtin readers for common formats, LLM-generated
//! reader scripts for everything else.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::llm::{Gateway, RoleSettings};
use crate::parse::extract_fenced_block;
use crate::prompts;
use crate::sandbox::{Sandbox, ScriptJob};
use crate::text::{truncate_chars, truncate_middle};

use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReaderKind {
    BuiltinReader,
    GeneratedReader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilePerceptionReport {
    pub file_path: PathBuf,
    pub report_text: String,
    pub produced_by: ReaderKind,
    /// The generated reader crashed; `report_text` holds its error output.
    pub failed: bool,
}

/// Limits and settings for one perception pass.
#[derive(Debug, Clone)]
pub struct ReaderSettings {
    pub max_chars: usize,
    pub details: bool,
    pub always_generate: bool,
    pub timeout: Duration,
    pub python: String,
    pub role: RoleSettings,
}

const TABULAR: &[&str] = &["csv", "tsv"];
const TEXT: &[&str] = &[
    "txt", "md", "json", "jsonl", "yaml", "yml", "py", "html", "xml", "log", "ini", "cfg", "toml", "rst",
];
const IMAGE: &[&str] = &["png", "jpg", "jpeg", "gif", "bmp", "tif", "tiff", "webp"];

fn size_line(bytes: u64) -> String {
    format!("File Size: {:.2} MB", bytes as f64 / (1024.0 * 1024.0))
}

fn ext_lower(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default()
}

fn is_hidden(path: &Path) -> bool {
    path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
}

/// Python `repr` of a string.
fn py_repr(s: &str) -> String {
    if s.contains('\'') && !s.contains('"') {
        format!("\"{s}\"")
    } else {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    }
}

fn head_bytes(path: &Path, n: usize) -> std::io::Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(n);
    File::open(path)?.take(n as u64).read_to_end(&mut buf)?;
    Ok(buf)
}

fn looks_like_text(bytes: &[u8]) -> bool {
    if bytes.contains(&0) {
        return false;
    }
    match std::str::from_utf8(bytes) {
        Ok(_) => true,
        // a multi-byte character may be cut at the sample boundary
        Err(e) => e.error_len().is_none(),
    }
}

fn tabular_report(path: &Path, delimiter: u8, details: bool) -> Option<String> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .ok()?;
    let mut records = rdr.records();
    let header = records.next()?.ok()?;
    let columns: Vec<String> = header.iter().map(py_repr).collect();
    let shown = if columns.len() > 20 {
        let mut v = columns[..10].to_vec();
        v.push("...".into());
        v.extend_from_slice(&columns[columns.len() - 10..]);
        v
    } else {
        columns
    };
    let mut out = format!("Column names: [{}]\nFirst rows:", shown.join(", "));
    let mut total = 0usize;
    for (i, rec) in records.enumerate() {
        let rec = rec.ok()?;
        if i < 3 {
            let cells: Vec<String> = rec.iter().map(|c| truncate_chars(c, 30)).collect();
            out.push_str(&format!("\n{i}  {}", cells.join("  ")));
        } else if !details {
            break;
        }
        total += 1;
    }
    if details {
        out.push_str(&format!("\nTotal rows: {total}"));
    }
    Some(out)
}

fn text_report(path: &Path, max_chars: usize) -> std::io::Result<String> {
    let bytes = head_bytes(path, max_chars * 4 + 4)?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(format!(
        "First few lines (up to {max_chars} characters):\n{}",
        truncate_chars(&text, max_chars)
    ))
}

fn image_report(path: &Path) -> Option<String> {
    let header = head_bytes(path, 1024).ok()?;
    let kind = imagesize::image_type(&header).ok()?;
    let size = imagesize::size(path).ok()?;
    Some(format!(
        "Image Format: {}\nImage Size: ({}, {})",
        format!("{kind:?}").to_uppercase(),
        size.width,
        size.height
    ))
}

/// Report from a builtin reader, or `None` when the format needs generated code.
pub fn builtin_report(path: &Path, max_chars: usize, details: bool) -> Result<Option<String>, PerceptionError> {
    let io = |source| PerceptionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = std::fs::metadata(path).map_err(io)?.len();
    let mut report = size_line(bytes);
    if bytes == 0 || is_hidden(path) {
        return Ok(Some(report));
    }
    let ext = ext_lower(path);
    let body = if TABULAR.contains(&ext.as_str()) {
        let delim = if ext == "tsv" { b'\t' } else { b',' };
        match tabular_report(path, delim, details) {
            Some(r) => Some(r),
            None => Some(text_report(path, max_chars).map_err(io)?),
        }
    } else if IMAGE.contains(&ext.as_str()) {
        image_report(path)
    } else if TEXT.contains(&ext.as_str()) || looks_like_text(&head_bytes(path, 4096).map_err(io)?) {
        Some(text_report(path, max_chars).map_err(io)?)
    } else {
        None
    };
    Ok(body.map(|b| {
        report.push('\n');
        report.push_str(&b);
        truncate_chars(&report, max_chars)
    }))
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Asks the file reader for code, runs it in the sandbox and returns its output.
pub fn generated_report(
    path: &Path,
    index: usize,
    settings: &ReaderSettings,
    gateway: &Gateway,
    sandbox: &Sandbox,
) -> Result<FilePerceptionReport, PerceptionError> {
    let prompt = prompts::file_perception(&path.to_string_lossy(), settings.max_chars, settings.details);
    let response = gateway.ask(&settings.role, "file_reader", &prompt)?;
    let code = extract_fenced_block(&response, "python").unwrap_or_else(|_| response.trim().to_string());

    let dir = sandbox.workspace().root().join("perception");
    let code_path = dir.join(format!("reader_{index}.py"));
    std::fs::create_dir_all(&dir).map_err(|source| PerceptionError::Io {
        path: dir.clone(),
        source,
    })?;
    std::fs::write(&code_path, &code).map_err(|source| PerceptionError::Io {
        path: code_path.clone(),
        source,
    })?;
    let script = format!("{} {}\n", settings.python, shell_quote(&code_path.to_string_lossy()));
    let result = sandbox.execute_shell_script(&ScriptJob {
        script: &script,
        script_path: dir.join(format!("reader_{index}.sh")),
        stdout_log: None,
        stderr_log: None,
        timeout: settings.timeout,
    })?;
    let failed = result.return_code != 0;
    let text = if failed {
        let err = if result.stderr.trim().is_empty() {
            format!("reader exited with code {}", result.return_code)
        } else {
            result.stderr
        };
        truncate_middle(
            &err,
            settings.max_chars.saturating_sub(crate::text::TRUNCATION_OVERHEAD),
        )
    } else {
        truncate_chars(&result.stdout, settings.max_chars)
    };
    Ok(FilePerceptionReport {
        file_path: path.to_path_buf(),
        report_text: text,
        produced_by: ReaderKind::GeneratedReader,
        failed,
    })
}

pub fn perceive_file(
    path: &Path,
    index: usize,
    settings: &ReaderSettings,
    gateway: &Gateway,
    sandbox: &Sandbox,
) -> Result<FilePerceptionReport, PerceptionError> {
    if !settings.always_generate
        && let Some(report_text) = builtin_report(path, settings.max_chars, settings.details)?
    {
        return Ok(FilePerceptionReport {
            file_path: path.to_path_buf(),
            report_text,
            produced_by: ReaderKind::BuiltinReader,
            failed: false,
        });
    }
    generated_report(path, index, settings, gateway, sandbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_lists_columns_like_python() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("test.csv");
        std::fs::write(
            &p,
            "Sex,Length,Class_number_of_rings\nI,0.620,9\nF,0.645,11\nF,0.620,10\nM,0.5,8\n",
        )
        .unwrap();
        let r = builtin_report(&p, 1024, false).unwrap().unwrap();
        assert!(r.starts_with(
            "File Size: 0.00 MB\nColumn names: ['Sex', 'Length', 'Class_number_of_rings']\nFirst rows:\n0  I  0.620  9"
        ));
        assert!(!r.contains("M  0.5"));
        let detailed = builtin_report(&p, 1024, true).unwrap().unwrap();
        assert!(detailed.ends_with("Total rows: 4"));
    }

    #[test]
    fn wide_tables_elide_middle_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wide.csv");
        let header: Vec<String> = (0..25).map(|i| format!("c{i}")).collect();
        std::fs::write(&p, format!("{}\n", header.join(","))).unwrap();
        let r = builtin_report(&p, 1024, false).unwrap().unwrap();
        assert!(r.contains("'c9', ..., 'c15'"));
    }

    #[test]
    fn empty_file_reports_size_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        std::fs::write(&p, "").unwrap();
        assert_eq!(builtin_report(&p, 1024, false).unwrap().unwrap(), "File Size: 0.00 MB");
    }

    #[test]
    fn long_text_respects_cap() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("notes.txt");
        std::fs::write(&p, "abcdefghij\n".repeat(1000)).unwrap();
        let r = builtin_report(&p, 1024, false).unwrap().unwrap();
        assert!(r.chars().count() <= 1024);
        assert!(r.contains("First few lines (up to 1024 characters):\nabcdefghij"));
    }

    #[test]
    fn png_header_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        let mut png = vec![
            0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0, 0, 13, b'I', b'H', b'D', b'R',
        ];
        png.extend_from_slice(&3u32.to_be_bytes());
        png.extend_from_slice(&2u32.to_be_bytes());
        png.extend_from_slice(&[8, 0, 0, 0, 0, 0, 0, 0, 0]);
        std::fs::write(&p, png).unwrap();
        let r = builtin_report(&p, 1024, false).unwrap().unwrap();
        assert!(r.ends_with("Image Format: PNG\nImage Size: (3, 2)"), "{r}");
    }

    #[test]
    fn unknown_binary_needs_generated_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("blob.parquet");
        std::fs::write(&p, [0u8, 1, 2, 255, 0, 7]).unwrap();
        assert_eq!(builtin_report(&p, 1024, false).unwrap(), None);
    }

    #[test]
    fn repr_quotes() {
        assert_eq!(py_repr("a"), "'a'");
        assert_eq!(py_repr("it's"), "\"it's\"");
    }
}

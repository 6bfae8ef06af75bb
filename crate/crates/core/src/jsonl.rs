//! JSON Lines reading and writing with the `{"_schema":"themis/1"}` header.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::types::{parse_as, JsonRecord, RecordError};

pub const SCHEMA_VERSION: &str = "themis/1";

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: RecordError,
    },
    #[error("{path}: unsupported schema {found:?} (expected {SCHEMA_VERSION:?})")]
    Schema { path: String, found: String },
}

impl JsonlError {
    /// Data errors (bad records) as opposed to I/O failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, JsonlError::Io { .. })
    }
}

fn schema_of(line: &str) -> Option<String> {
    if !line.contains("\"_schema\"") {
        return None;
    }
    let v: Value = serde_json::from_str(line).ok()?;
    let obj = v.as_object()?;
    if obj.len() != 1 {
        return None;
    }
    obj.get("_schema")?.as_str().map(str::to_owned)
}

/// Parse JSONL text. Blank lines are skipped; a schema header, if present,
/// must be the first non-blank line.
pub fn parse_str<T: JsonRecord>(text: &str, origin: &str) -> Result<Vec<T>, JsonlError> {
    parse_with(text, origin, parse_as::<T>)
}

/// Like [`parse_str`] with a caller-supplied line parser, e.g.
/// [`crate::types::parse_record`] for files mixing record types.
pub fn parse_with<T>(
    text: &str,
    origin: &str,
    parse: impl Fn(&str) -> Result<T, RecordError>,
) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    let mut seen_first = false;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_first {
            seen_first = true;
            if let Some(found) = schema_of(trimmed) {
                if found != SCHEMA_VERSION {
                    return Err(JsonlError::Schema { path: origin.to_string(), found });
                }
                continue;
            }
        }
        let rec = parse(trimmed).map_err(|source| JsonlError::Record {
            path: origin.to_string(),
            line: idx + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_path<T: JsonRecord>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let text = read_text(path)?;
    parse_str(&text, &path.display().to_string())
}

pub fn read_text(path: &Path) -> Result<String, JsonlError> {
    let origin = path.display().to_string();
    let io_err = |source| JsonlError::Io { path: origin.clone(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|source| JsonlError::Io { path: origin.clone(), source })?);
        text.push('\n');
    }
    Ok(text)
}

/// Render records as JSONL with the schema header.
pub fn to_string<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    out.push_str(&header_line());
    out.push('\n');
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn header_line() -> String {
    serde_json::json!({ "_schema": SCHEMA_VERSION }).to_string()
}

pub fn write_path<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let origin = path.display().to_string();
    let io_err = |source| JsonlError::Io { path: origin.clone(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(to_string(records).as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

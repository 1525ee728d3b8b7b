//! JSON Lines ingestion into a new knowledge-base version.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use asknearby_core::model::{build_knowledge_base, validate_item, AttributeLexicon, DaySchedule};
use asknearby_core::{InfoItem, KnowledgeBase};
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} line {}", self.reason, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub reasons: Vec<String>,
    pub version: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("FileNotFound({})", .0.display())]
    FileNotFound(PathBuf),
    #[error("NoValidLines ({} rejected)", .0.len())]
    NoValidLines(Vec<Rejection>),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Validate every non-blank line. Ids already in `base` or repeated within
/// the batch are rejected.
pub fn parse_lines(
    text: &str,
    base: Option<&KnowledgeBase>,
    schedule: &DaySchedule,
    attributes: &AttributeLexicon,
) -> (Vec<InfoItem>, Vec<Rejection>) {
    let mut items = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(raw)) => check_line(&raw, base, &mut seen, schedule, attributes),
            Ok(_) => Err("NotAnObject".to_string()),
            Err(e) => Err(format!("BadJson({e})")),
        };
        match outcome {
            Ok(item) => items.push(item),
            Err(reason) => {
                tracing::warn!(line = no, reason = reason.as_str(), "rejected ingest line");
                rejections.push(Rejection { line: no, reason });
            }
        }
    }
    (items, rejections)
}

fn check_line(
    raw: &Map<String, Value>,
    base: Option<&KnowledgeBase>,
    seen: &mut BTreeSet<String>,
    schedule: &DaySchedule,
    attributes: &AttributeLexicon,
) -> Result<InfoItem, String> {
    let item = validate_item(raw, schedule, attributes).map_err(|e| e.to_string())?;
    if base.is_some_and(|kb| kb.contains(&item.id)) || !seen.insert(item.id.0.clone()) {
        return Err(format!("DuplicateId({})", item.id));
    }
    Ok(item)
}

/// Next kb version from `text`, with the per-line report.
pub fn ingest_text(
    text: &str,
    base: Option<&KnowledgeBase>,
    schedule: &DaySchedule,
    attributes: &AttributeLexicon,
) -> Result<(KnowledgeBase, IngestReport), IngestError> {
    let (items, rejections) = parse_lines(text, base, schedule, attributes);
    if items.is_empty() {
        return Err(IngestError::NoValidLines(rejections));
    }
    let accepted = items.len();
    // Ids were checked against the base and the batch, so extension cannot fail.
    let kb = match base {
        Some(kb) => kb.extended(items),
        None => build_knowledge_base(items),
    }
    .expect("ids already deduplicated");
    let report = IngestReport {
        accepted,
        rejected: rejections.len(),
        reasons: rejections.iter().map(Rejection::to_string).collect(),
        version: kb.version(),
    };
    Ok((kb, report))
}

pub fn read_source(path: &Path) -> Result<String, IngestError> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(IngestError::FileNotFound(path.to_path_buf())),
        Err(source) => Err(IngestError::Io { path: path.to_path_buf(), source }),
    }
}

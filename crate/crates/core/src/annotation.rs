//! Append-only log of manual decisions and rule refinements, and their
//! replay onto automatic verdicts.
//!
//! The log is UTF-8 JSON Lines with a `type` discriminator
//! (`"annotation"` or `"refinement"`). Every append is flushed to disk with
//! `fsync` before it is acknowledged. Records are never rewritten; a later
//! record for the same cell supersedes an earlier one.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::VerdictMatrix;
use crate::rules::{compile_rule, Outcome, Provenance, Verdict};
use crate::suite::{Rule, TestSuite};

/// A manual decision. Annotators resolve uncertainty; they never create it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Pass,
    Fail,
}

impl Decision {
    pub fn outcome(self) -> Outcome {
        match self {
            Decision::Pass => Outcome::Pass,
            Decision::Fail => Outcome::Fail,
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Decision::Pass),
            "fail" => Ok(Decision::Fail),
            other => Err(Error::InvalidRecord(format!(
                "decision must be pass or fail, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub timestamp: DateTime<Utc>,
    pub item_id: String,
    pub system_name: String,
    pub decision: Decision,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRefinement {
    pub timestamp: DateTime<Utc>,
    pub item_id: String,
    pub added_rule: Rule,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEntry {
    Annotation(AnnotationRecord),
    Refinement(RuleRefinement),
}

impl LogEntry {
    pub fn timestamp(&self) -> DateTime<Utc> {
        match self {
            LogEntry::Annotation(r) => r.timestamp,
            LogEntry::Refinement(r) => r.timestamp,
        }
    }

    pub fn idempotency_key(&self) -> Option<&str> {
        match self {
            LogEntry::Annotation(r) => r.idempotency_key.as_deref(),
            LogEntry::Refinement(r) => r.idempotency_key.as_deref(),
        }
    }

    fn validate(&self) -> Result<()> {
        let blank = |field: &str, what: &str| {
            if field.trim().is_empty() {
                Err(Error::InvalidRecord(format!("{what} is empty")))
            } else {
                Ok(())
            }
        };
        match self {
            LogEntry::Annotation(r) => {
                blank(&r.item_id, "item_id")?;
                blank(&r.system_name, "system_name")?;
                blank(&r.annotator, "annotator")
            }
            LogEntry::Refinement(r) => {
                blank(&r.item_id, "item_id")?;
                blank(&r.annotator, "annotator")?;
                compile_rule(&r.item_id, 0, &r.added_rule).map(|_| ())
            }
        }
    }
}

/// The annotation log. File-backed logs are opened in append mode.
#[derive(Debug)]
pub struct AnnotationLog {
    path: Option<PathBuf>,
    file: Option<File>,
    entries: Vec<LogEntry>,
    keys: HashSet<String>,
}

impl AnnotationLog {
    pub fn in_memory() -> Self {
        AnnotationLog {
            path: None,
            file: None,
            entries: Vec::new(),
            keys: HashSet::new(),
        }
    }

    /// Opens (creating if needed) the log at `path` and reads its records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let entries = if path.exists() {
            read_log(path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let keys = entries
            .iter()
            .filter_map(|e| e.idempotency_key().map(str::to_string))
            .collect();
        Ok(AnnotationLog {
            path: Some(path.to_path_buf()),
            file: Some(file),
            entries,
            keys,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Annotation(r) => Some(r),
            _ => None,
        })
    }

    pub fn refinements(&self) -> impl Iterator<Item = &RuleRefinement> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Refinement(r) => Some(r),
            _ => None,
        })
    }

    pub fn find_by_key(&self, key: &str) -> Option<&LogEntry> {
        self.entries
            .iter()
            .find(|e| e.idempotency_key() == Some(key))
    }

    /// Appends `entry`. Returns `false` without writing when an entry with
    /// the same idempotency key is already present.
    pub fn append(&mut self, entry: LogEntry) -> Result<bool> {
        entry.validate()?;
        if let Some(key) = entry.idempotency_key() {
            if self.keys.contains(key) {
                return Ok(false);
            }
        }
        if let Some(file) = self.file.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<log>"));
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| Error::io(path, e))?;
        }
        if let Some(key) = entry.idempotency_key() {
            self.keys.insert(key.to_string());
        }
        self.entries.push(entry);
        Ok(true)
    }

    /// A write-time timestamp, strictly after every record already logged so
    /// that log order and timestamp order agree.
    pub fn next_timestamp(&self) -> DateTime<Utc> {
        let now = Utc::now();
        match self.entries.iter().map(LogEntry::timestamp).max() {
            Some(last) if last >= now => last + Duration::microseconds(1),
            _ => now,
        }
    }

    /// Stamps and appends a manual decision.
    pub fn record_annotation(
        &mut self,
        item_id: &str,
        system_name: &str,
        decision: Decision,
        annotator: &str,
        note: Option<String>,
        idempotency_key: Option<String>,
    ) -> Result<AnnotationRecord> {
        if let Some(LogEntry::Annotation(existing)) =
            idempotency_key.as_deref().and_then(|k| self.find_by_key(k))
        {
            return Ok(existing.clone());
        }
        let record = AnnotationRecord {
            timestamp: self.next_timestamp(),
            item_id: item_id.to_string(),
            system_name: system_name.to_string(),
            decision,
            annotator: annotator.to_string(),
            note,
            idempotency_key,
        };
        append_annotation(self, record.clone())?;
        Ok(record)
    }

    /// Stamps and appends a rule refinement.
    pub fn record_refinement(
        &mut self,
        item_id: &str,
        added_rule: Rule,
        annotator: &str,
        idempotency_key: Option<String>,
    ) -> Result<RuleRefinement> {
        if let Some(LogEntry::Refinement(existing)) =
            idempotency_key.as_deref().and_then(|k| self.find_by_key(k))
        {
            return Ok(existing.clone());
        }
        let record = RuleRefinement {
            timestamp: self.next_timestamp(),
            item_id: item_id.to_string(),
            added_rule,
            annotator: annotator.to_string(),
            idempotency_key,
        };
        self.append(LogEntry::Refinement(record.clone()))?;
        Ok(record)
    }
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_log(&text, &path.display().to_string())
}

pub fn parse_log(text: &str, origin: &str) -> Result<Vec<LogEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn append_annotation(log: &mut AnnotationLog, record: AnnotationRecord) -> Result<()> {
    log.append(LogEntry::Annotation(record)).map(|_| ())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DanglingAnnotation {
    pub item_id: String,
    pub system_name: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    /// Cells that received a manual decision.
    pub applied: usize,
    pub dangling: Vec<DanglingAnnotation>,
}

/// Replays the manual decisions in `log` onto `auto`.
///
/// For each cell the record with the latest timestamp wins (log order breaks
/// ties). Records repeating an idempotency key are ignored. Decisions for
/// unknown items or systems are skipped and reported.
pub fn apply_annotations(auto: &VerdictMatrix, log: &[LogEntry]) -> (VerdictMatrix, ReplayReport) {
    let mut report = ReplayReport::default();
    let mut seen_keys = HashSet::new();
    let mut winners: HashMap<(usize, usize), &AnnotationRecord> = HashMap::new();

    for entry in log {
        let LogEntry::Annotation(record) = entry else {
            continue;
        };
        if let Some(key) = &record.idempotency_key {
            if !seen_keys.insert(key.as_str()) {
                continue;
            }
        }
        let (Some(i), Some(s)) = (
            auto.item_index(&record.item_id),
            auto.system_index(&record.system_name),
        ) else {
            let reason = if auto.item_index(&record.item_id).is_none() {
                "unknown item"
            } else {
                "unknown system"
            };
            report.dangling.push(DanglingAnnotation {
                item_id: record.item_id.clone(),
                system_name: record.system_name.clone(),
                reason,
            });
            continue;
        };
        winners
            .entry((i, s))
            .and_modify(|current| {
                if record.timestamp >= current.timestamp {
                    *current = record;
                }
            })
            .or_insert(record);
    }

    let mut resolved = auto.clone();
    for (&(i, s), record) in &winners {
        let matched = auto.at(i, s).matched_rules.clone();
        resolved.set_at(
            i,
            s,
            Verdict {
                outcome: record.decision.outcome(),
                matched_rules: matched,
                provenance: Provenance::Manual,
            },
        );
    }
    report.applied = winners.len();
    (resolved, report)
}

/// Appends each refinement's rule to its item.
pub fn apply_refinements(suite: &TestSuite, refinements: &[RuleRefinement]) -> Result<TestSuite> {
    let mut items = suite.items().to_vec();
    for r in refinements {
        let pos = suite
            .position(&r.item_id)
            .ok_or_else(|| Error::UnknownItem(r.item_id.clone()))?;
        let item = &mut items[pos];
        compile_rule(&item.id, item.rules.len(), &r.added_rule)?;
        item.rules.push(r.added_rule.clone());
    }
    TestSuite::new(suite.name(), suite.version(), items)
}

/// A cell whose outcome differs between two matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellChange {
    pub item_id: String,
    pub system_name: String,
    pub before: Verdict,
    pub after: Verdict,
}

impl CellChange {
    /// True when a decided cell became a contradiction.
    pub fn is_new_contradiction(&self) -> bool {
        !self.before.is_warning()
            && self.after.outcome
                == Outcome::Warning(crate::rules::WarningReason::Contradiction)
    }
}

/// Cells whose outcome or provenance changed. Both matrices must share labels.
pub fn diff_matrices(before: &VerdictMatrix, after: &VerdictMatrix) -> Vec<CellChange> {
    before
        .iter()
        .filter_map(|(item, system, old)| {
            let new = after.get(item, system)?;
            (old.outcome != new.outcome || old.provenance != new.provenance).then(|| CellChange {
                item_id: item.to_string(),
                system_name: system.to_string(),
                before: old.clone(),
                after: new.clone(),
            })
        })
        .collect()
}

//! Builders for synthetic suites whose evaluation reproduces given counts.
//!
//! Every generated item has the same two rules (positive `\bcorrect\b`,
//! negative `\bwrong\b`), so a system's outputs decide its verdicts
//! directly. Useful for reconstructing published accuracy tables and for
//! load tests.

use crate::error::Result;
use crate::suite::{Rule, SystemOutput, TestItem, TestSuite};

pub const PASS_TEXT: &str = "a correct translation";
pub const FAIL_TEXT: &str = "a wrong translation";
/// Matches neither rule.
pub const NO_MATCH_TEXT: &str = "an unrelated translation";
/// Matches both rules.
pub const CONTRADICTION_TEXT: &str = "a correct and a wrong translation";

/// One table row: `items` items, of which system `s` passes `correct[s]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub category: String,
    pub phenomenon: String,
    pub items: u64,
    pub correct: Vec<u64>,
}

impl CountRow {
    /// A category with a single phenomenon of the same name.
    pub fn category(label: impl Into<String>, items: u64, correct: Vec<u64>) -> Self {
        let label = label.into();
        CountRow {
            category: label.clone(),
            phenomenon: label,
            items,
            correct,
        }
    }
}

fn slug(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

pub fn synthetic_item(id: String, category: &str, phenomenon: &str) -> TestItem {
    TestItem {
        id,
        category: category.to_string(),
        phenomenon: phenomenon.to_string(),
        source: format!("Testsatz für {phenomenon}."),
        rules: vec![
            Rule::positive_regex(r"\bcorrect\b"),
            Rule::negative_regex(r"\bwrong\b"),
        ],
    }
}

/// Builds a suite and one output set per system so that, with no warnings,
/// system `s` passes exactly `row.correct[s]` items of each row.
///
/// Panics if a row's `correct` length differs from `systems` or a count
/// exceeds the row's items.
pub fn suite_from_counts(
    name: &str,
    rows: &[CountRow],
    systems: &[String],
) -> Result<(TestSuite, Vec<SystemOutput>)> {
    let mut items = Vec::new();
    let mut outputs: Vec<SystemOutput> = systems.iter().map(SystemOutput::new).collect();
    for row in rows {
        assert_eq!(row.correct.len(), systems.len(), "row `{}`", row.phenomenon);
        let prefix = slug(&row.phenomenon);
        for k in 0..row.items {
            let id = format!("{prefix}-{k:05}");
            for (s, out) in outputs.iter_mut().enumerate() {
                assert!(row.correct[s] <= row.items, "row `{}`", row.phenomenon);
                let text = if k < row.correct[s] { PASS_TEXT } else { FAIL_TEXT };
                out.translations.insert(id.clone(), text.to_string());
            }
            items.push(synthetic_item(id, &row.category, &row.phenomenon));
        }
    }
    Ok((TestSuite::new(name, "synthetic", items)?, outputs))
}

//! Rule compilation and single-output classification.
//!
//! Regex rules use the `regex` crate dialect: alternation, grouping,
//! character classes, bounded repetition, `\b` and line anchors, and the
//! `(?i)` / per-rule case flag. Backreferences and lookaround are rejected
//! at compile time, which keeps matching linear in the output length.

use std::collections::HashMap;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::suite::{Polarity, Rule, RuleKind, TestItem, TestSuite};

/// Trims leading and trailing whitespace. Internal characters are untouched.
pub fn normalize_output(text: &str) -> &str {
    text.trim()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningReason {
    NoMatch,
    Contradiction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Pass,
    Fail,
    Warning(WarningReason),
}

impl Outcome {
    pub fn status(self) -> Status {
        match self {
            Outcome::Pass => Status::Pass,
            Outcome::Fail => Status::Fail,
            Outcome::Warning(_) => Status::Warning,
        }
    }

    pub fn warning_reason(self) -> Option<WarningReason> {
        match self {
            Outcome::Warning(reason) => Some(reason),
            _ => None,
        }
    }

    pub fn is_warning(self) -> bool {
        matches!(self, Outcome::Warning(_))
    }

    pub fn is_pass(self) -> bool {
        self == Outcome::Pass
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Pass => f.write_str("pass"),
            Outcome::Fail => f.write_str("fail"),
            Outcome::Warning(WarningReason::NoMatch) => f.write_str("warning(no_match)"),
            Outcome::Warning(WarningReason::Contradiction) => {
                f.write_str("warning(contradiction)")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Automatic,
    Manual,
}

/// The adjudication of one system output for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRepr", into = "VerdictRepr")]
pub struct Verdict {
    pub outcome: Outcome,
    /// Indices of every rule that matched, in rule order.
    pub matched_rules: Vec<usize>,
    pub provenance: Provenance,
}

impl Verdict {
    pub fn automatic(outcome: Outcome, matched_rules: Vec<usize>) -> Self {
        Verdict {
            outcome,
            matched_rules,
            provenance: Provenance::Automatic,
        }
    }

    pub fn status(&self) -> Status {
        self.outcome.status()
    }

    pub fn warning_reason(&self) -> Option<WarningReason> {
        self.outcome.warning_reason()
    }

    pub fn is_warning(&self) -> bool {
        self.outcome.is_warning()
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictRepr {
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning_reason: Option<WarningReason>,
    #[serde(default)]
    matched_rules: Vec<usize>,
    provenance: Provenance,
}

impl From<Verdict> for VerdictRepr {
    fn from(v: Verdict) -> Self {
        VerdictRepr {
            status: v.outcome.status(),
            warning_reason: v.outcome.warning_reason(),
            matched_rules: v.matched_rules,
            provenance: v.provenance,
        }
    }
}

impl TryFrom<VerdictRepr> for Verdict {
    type Error = String;

    fn try_from(r: VerdictRepr) -> std::result::Result<Self, String> {
        let outcome = match (r.status, r.warning_reason) {
            (Status::Pass, None) => Outcome::Pass,
            (Status::Fail, None) => Outcome::Fail,
            (Status::Warning, Some(reason)) => Outcome::Warning(reason),
            (Status::Warning, None) => return Err("warning verdict without a reason".into()),
            (_, Some(_)) => return Err("warning_reason on a non-warning verdict".into()),
        };
        if r.provenance == Provenance::Manual && outcome.is_warning() {
            return Err("manual verdicts cannot be warnings".into());
        }
        Ok(Verdict {
            outcome,
            matched_rules: r.matched_rules,
            provenance: r.provenance,
        })
    }
}

/// Byte range `[start, end)` into the raw output text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
enum Matcher {
    Regex(Regex),
    Literal { sentence: String, fold_case: bool },
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub rule: Rule,
    matcher: Matcher,
}

impl CompiledRule {
    /// Matches against already-normalized text.
    pub fn is_match(&self, normalized: &str) -> bool {
        match &self.matcher {
            Matcher::Regex(re) => re.is_match(normalized),
            Matcher::Literal {
                sentence,
                fold_case: false,
            } => normalized == sentence,
            Matcher::Literal {
                sentence,
                fold_case: true,
            } => normalized.to_lowercase() == sentence.to_lowercase(),
        }
    }

    /// Match spans in `raw`, computed on its normalized form.
    pub fn spans(&self, raw: &str) -> Vec<Span> {
        let normalized = normalize_output(raw);
        let offset = raw.len() - raw.trim_start().len();
        match &self.matcher {
            Matcher::Regex(re) => re
                .find_iter(normalized)
                .map(|m| Span {
                    start: offset + m.start(),
                    end: offset + m.end(),
                })
                .collect(),
            Matcher::Literal { .. } => {
                if self.is_match(normalized) {
                    vec![Span {
                        start: offset,
                        end: offset + normalized.len(),
                    }]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

/// The compiled rules of one item, one matcher per source rule.
#[derive(Debug, Clone)]
pub struct CompiledRuleSet {
    pub item_id: String,
    pub rules: Vec<CompiledRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    pub rule_index: usize,
    pub polarity: Polarity,
    pub spans: Vec<Span>,
}

impl CompiledRuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Spans for every rule that matches `raw`.
    pub fn matches(&self, raw: &str) -> Vec<RuleMatch> {
        let normalized = normalize_output(raw);
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_match(normalized))
            .map(|(rule_index, r)| RuleMatch {
                rule_index,
                polarity: r.rule.polarity,
                spans: r.spans(raw),
            })
            .collect()
    }
}

fn build_regex(pattern: &str, case_insensitive: bool) -> std::result::Result<Regex, regex::Error> {
    RegexBuilder::new(pattern)
        .case_insensitive(case_insensitive)
        .build()
}

/// Compiles a single rule; errors cite the item, rule index and pattern.
pub fn compile_rule(item_id: &str, rule_index: usize, rule: &Rule) -> Result<CompiledRule> {
    compile_with(item_id, rule_index, rule, &mut |p, ci| build_regex(p, ci))
}

fn compile_with(
    item_id: &str,
    rule_index: usize,
    rule: &Rule,
    build: &mut dyn FnMut(&str, bool) -> std::result::Result<Regex, regex::Error>,
) -> Result<CompiledRule> {
    let matcher = match rule.kind {
        RuleKind::Regex => {
            let re = build(&rule.pattern, rule.case_insensitive).map_err(|e| Error::RuleCompile {
                item_id: item_id.to_string(),
                rule_index,
                pattern: rule.pattern.clone(),
                message: e.to_string(),
            })?;
            Matcher::Regex(re)
        }
        RuleKind::LiteralSentence => {
            if rule.pattern.trim().is_empty() {
                return Err(Error::EmptyLiteral {
                    item_id: item_id.to_string(),
                    rule_index,
                });
            }
            Matcher::Literal {
                sentence: normalize_output(&rule.pattern).to_string(),
                fold_case: rule.case_insensitive,
            }
        }
    };
    Ok(CompiledRule {
        rule: rule.clone(),
        matcher,
    })
}

pub fn compile_rules(item: &TestItem) -> Result<CompiledRuleSet> {
    let rules = item
        .rules
        .iter()
        .enumerate()
        .map(|(idx, rule)| compile_rule(&item.id, idx, rule))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompiledRuleSet {
        item_id: item.id.clone(),
        rules,
    })
}

/// Compiles every item of `suite`, reusing regexes shared between items.
pub fn compile_suite(suite: &TestSuite) -> Result<Vec<CompiledRuleSet>> {
    let mut cache: HashMap<(String, bool), Regex> = HashMap::new();
    let mut build = |pattern: &str, ci: bool| -> std::result::Result<Regex, regex::Error> {
        if let Some(re) = cache.get(&(pattern.to_string(), ci)) {
            return Ok(re.clone());
        }
        let re = build_regex(pattern, ci)?;
        cache.insert((pattern.to_string(), ci), re.clone());
        Ok(re)
    };
    suite
        .items()
        .iter()
        .map(|item| {
            let rules = item
                .rules
                .iter()
                .enumerate()
                .map(|(idx, rule)| compile_with(&item.id, idx, rule, &mut build))
                .collect::<Result<Vec<_>>>()?;
            Ok(CompiledRuleSet {
                item_id: item.id.clone(),
                rules,
            })
        })
        .collect()
}

/// Classifies one raw output against an item's compiled rules.
///
/// Positive-only matches pass, negative-only matches fail, both or neither
/// yield a warning.
pub fn classify(output: &str, rules: &CompiledRuleSet) -> Verdict {
    let normalized = normalize_output(output);
    let mut positive = false;
    let mut negative = false;
    let mut matched = Vec::new();
    for (idx, rule) in rules.rules.iter().enumerate() {
        if rule.is_match(normalized) {
            matched.push(idx);
            match rule.rule.polarity {
                Polarity::Positive => positive = true,
                Polarity::Negative => negative = true,
            }
        }
    }
    let outcome = match (positive, negative) {
        (true, false) => Outcome::Pass,
        (false, true) => Outcome::Fail,
        (true, true) => Outcome::Warning(WarningReason::Contradiction),
        (false, false) => Outcome::Warning(WarningReason::NoMatch),
    };
    Verdict::automatic(outcome, matched)
}

/// Dry-run of a regex pattern over sample texts.
pub fn test_pattern(
    pattern: &str,
    case_insensitive: bool,
    samples: &[String],
) -> std::result::Result<Vec<Vec<Span>>, regex::Error> {
    let rule = CompiledRule {
        rule: Rule::positive_regex(pattern).case_insensitive(case_insensitive),
        matcher: Matcher::Regex(build_regex(pattern, case_insensitive)?),
    };
    Ok(samples.iter().map(|s| rule.spans(s)).collect())
}

//! Rule-driven evaluation of text-generation systems against a
//! linguistically organized test suite.
//!
//! Each test item carries positive and negative control rules (regular
//! expressions or whole sentences). An output matching only positive rules
//! passes, one matching only negative rules fails, and anything else is a
//! warning left for a human annotator. Items with a warning for any system
//! are dropped, accuracies are computed per phenomenon and category, and
//! the best systems of each row are found with a one-tailed two-proportion
//! Z-test.
//!
//! ```
//! use tqh::rules::{classify, compile_rules, Outcome};
//! use tqh::suite::{Rule, TestItem};
//!
//! let item = TestItem {
//!     id: "amb-001".into(),
//!     category: "Ambiguity".into(),
//!     phenomenon: "Lexical ambiguity".into(),
//!     source: "Das Gericht gestern Abend war lecker.".into(),
//!     rules: vec![Rule::positive_regex(r"\bdish\b"), Rule::negative_regex(r"\bcourt\b")],
//! };
//! let rules = compile_rules(&item).unwrap();
//! assert_eq!(classify("The dish last night was delicious.", &rules).outcome, Outcome::Pass);
//! assert_eq!(classify("The court last night was delicious.", &rules).outcome, Outcome::Fail);
//! ```

pub mod annotation;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod report;
pub mod rules;
pub mod stats;
pub mod suite;
pub mod synthetic;

pub use annotation::{
    append_annotation, apply_annotations, apply_refinements, AnnotationLog, AnnotationRecord,
    Decision, LogEntry, RuleRefinement,
};
pub use error::{Error, Result};
pub use evaluator::{
    evaluate, select_valid_items, warning_rate, AccuracyCell, DenominatorMode, EvaluateOptions,
    EvaluationRun, MissingPolicy, Scope, VerdictMatrix,
};
pub use report::{export_run, load_run, render_accuracy_table, render_delta_table, Format, ReportSpec};
pub use rules::{classify, compile_rules, normalize_output, Outcome, Provenance, Verdict, WarningReason};
pub use stats::{best_cluster, cluster_rows, compare_runs, z_test, ClusterRow, DeltaTable, SignificanceConfig};
pub use suite::{load_outputs, load_suite, suite_stats, Polarity, Rule, RuleKind, SystemOutput, TestItem, TestSuite};

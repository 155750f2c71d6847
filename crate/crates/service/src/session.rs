//! Triage state: the suite, outputs and log, plus the verdicts derived from
//! them. All mutations go through `&mut Session`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;
use tqh::annotation::{apply_annotations, apply_refinements, diff_matrices, AnnotationLog, CellChange, LogEntry};
use tqh::config::{ConfigLayer, CONFIG_FILE};
use tqh::evaluator::{classify_all, item_warning_rate, output_checksum};
use tqh::rules::{classify, compile_rules, RuleMatch};
use tqh::stats::{cluster_rows, items_cluster_row, SignificanceConfig};
use tqh::suite::load_outputs_dir;
use tqh::{
    load_suite, AnnotationRecord, Decision, EvaluateOptions, EvaluationRun, Outcome, Rule, RuleRefinement, Scope,
    SystemOutput, TestSuite, Verdict, VerdictMatrix,
};

/// File name of the annotation log when the run directory's config names none.
pub const DEFAULT_LOG: &str = "annotations.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("unknown cell `{0}` / `{1}`")]
    UnknownCell(String, String),
    #[error("cell `{0}` / `{1}` is not a warning")]
    NotAWarning(String, String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Core(#[from] tqh::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleView {
    pub index: usize,
    #[serde(flatten)]
    pub rule: Rule,
}

/// One warning cell as shown to the annotator.
#[derive(Debug, Clone, Serialize)]
pub struct TriageItem {
    pub item_id: String,
    pub system_name: String,
    pub category: String,
    pub phenomenon: String,
    pub source: String,
    pub output: Option<String>,
    pub rules: Vec<RuleView>,
    pub verdict: Verdict,
    pub matches: Vec<RuleMatch>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Page {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<TriageItem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportCell {
    pub correct: u64,
    pub total: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub category: String,
    pub items: u64,
    pub cells: Vec<ReportCell>,
    pub best_cluster: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scope: Scope,
    pub systems: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub items_row: ReportRow,
    /// Unweighted mean of category accuracies per system.
    pub categories_average: Vec<Option<f64>>,
    pub valid_items: usize,
    pub total_items: usize,
    pub warning_rate: f64,
    pub item_warning_rate: f64,
    /// Warnings of the automatic classification.
    pub warnings_total: usize,
    pub warnings_remaining: usize,
    pub progress: f64,
    pub stale: bool,
}

pub struct Session {
    base_suite: TestSuite,
    suite: TestSuite,
    outputs: Vec<SystemOutput>,
    log: AnnotationLog,
    options: EvaluateOptions,
    significance: SignificanceConfig,
    automatic: VerdictMatrix,
    effective: VerdictMatrix,
    run: EvaluationRun,
    stale: bool,
    allow_override: bool,
}

impl Session {
    pub fn new(
        suite: TestSuite,
        outputs: Vec<SystemOutput>,
        log: AnnotationLog,
        options: EvaluateOptions,
    ) -> Result<Self, SessionError> {
        let refinements: Vec<RuleRefinement> = log.refinements().cloned().collect();
        let refined = apply_refinements(&suite, &refinements)?;
        let automatic = classify_all(&refined, &outputs, &options)?;
        let (effective, _) = apply_annotations(&automatic, log.entries());
        let mut session = Session {
            base_suite: suite,
            run: EvaluationRun::from_verdicts(&refined, effective.clone(), options.denominator, IndexMap::new())?,
            suite: refined,
            outputs,
            log,
            options,
            significance: SignificanceConfig::default(),
            automatic,
            effective,
            stale: false,
            allow_override: false,
        };
        session.recompute()?;
        Ok(session)
    }

    /// Loads the suite, outputs and log named by `tqh.toml` in `run_dir`.
    pub fn from_run_dir(run_dir: impl AsRef<Path>) -> Result<Self, SessionError> {
        let run_dir = run_dir.as_ref();
        let cfg = ConfigLayer::from_file(run_dir.join(CONFIG_FILE))?;
        let missing = |what: &str| SessionError::Invalid(format!("{} does not name the {what}", run_dir.join(CONFIG_FILE).display()));
        let suite = load_suite(cfg.suite.as_ref().ok_or_else(|| missing("suite"))?)?;
        let outputs = load_outputs_dir(cfg.outputs.as_ref().ok_or_else(|| missing("outputs"))?, &suite)?;
        let log_path: PathBuf = cfg.annotations.clone().unwrap_or_else(|| run_dir.join(DEFAULT_LOG));
        let log = AnnotationLog::open(&log_path)?;
        let options = EvaluateOptions {
            missing: cfg.missing.unwrap_or_default(),
            workers: cfg.workers,
            ..Default::default()
        };
        let mut session = Session::new(suite, outputs, log, options)?;
        if let Some(alpha) = cfg.alpha {
            session.significance = SignificanceConfig::new(alpha)?;
        }
        Ok(session)
    }

    pub fn with_override(mut self, allow: bool) -> Self {
        self.allow_override = allow;
        self
    }

    pub fn with_significance(mut self, significance: SignificanceConfig) -> Self {
        self.significance = significance;
        self
    }

    pub fn log(&self) -> &AnnotationLog {
        &self.log
    }

    pub fn suite(&self) -> &TestSuite {
        &self.suite
    }

    pub fn effective(&self) -> &VerdictMatrix {
        &self.effective
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    /// Rebuilds the accuracy tables from the current effective verdicts.
    pub fn recompute(&mut self) -> Result<(), SessionError> {
        let checksums = self
            .outputs
            .iter()
            .map(|o| (o.system_name.clone(), output_checksum(o)))
            .collect();
        let mut run =
            EvaluationRun::from_verdicts(&self.suite, self.effective.clone(), self.options.denominator, checksums)?;
        let (_, replay) = apply_annotations(&self.automatic, self.log.entries());
        run.annotations_applied = replay.applied;
        run.annotations_dangling = replay.dangling.len();
        self.run = run;
        self.stale = false;
        Ok(())
    }

    pub fn run(&self) -> &EvaluationRun {
        &self.run
    }

    /// Hash of everything a request could change.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.suite.to_jsonl().hash(&mut h);
        self.log.len().hash(&mut h);
        serde_json::to_string(&self.effective).unwrap_or_default().hash(&mut h);
        serde_json::to_string(&self.automatic).unwrap_or_default().hash(&mut h);
        self.stale.hash(&mut h);
        h.finish()
    }

    /// Warning cells, ordered by item id and then system name.
    fn warning_cells(&self) -> Vec<(usize, usize)> {
        let m = &self.effective;
        let mut cells: Vec<(usize, usize)> = (0..m.items().len())
            .flat_map(|i| (0..m.systems().len()).map(move |s| (i, s)))
            .filter(|&(i, s)| m.at(i, s).is_warning())
            .collect();
        cells.sort_by(|a, b| {
            (m.items()[a.0].as_str(), m.systems()[a.1].as_str()).cmp(&(m.items()[b.0].as_str(), m.systems()[b.1].as_str()))
        });
        cells
    }

    pub fn warnings_remaining(&self) -> usize {
        self.effective.warning_count()
    }

    fn triage_item(&self, i: usize, s: usize) -> TriageItem {
        let item = &self.suite.items()[i];
        let system = &self.effective.systems()[s];
        let output = self.outputs[s].get(&item.id).map(str::to_string);
        let matches = match (&output, compile_rules(item)) {
            (Some(text), Ok(rules)) => rules.matches(text),
            _ => Vec::new(),
        };
        TriageItem {
            item_id: item.id.clone(),
            system_name: system.clone(),
            category: item.category.clone(),
            phenomenon: item.phenomenon.clone(),
            source: item.source.clone(),
            output,
            rules: item
                .rules
                .iter()
                .cloned()
                .enumerate()
                .map(|(index, rule)| RuleView { index, rule })
                .collect(),
            verdict: self.effective.at(i, s).clone(),
            matches,
        }
    }

    pub fn warnings(&self, offset: usize, limit: usize) -> Page {
        let cells = self.warning_cells();
        Page {
            total: cells.len(),
            offset,
            limit,
            items: cells
                .iter()
                .skip(offset)
                .take(limit)
                .map(|&(i, s)| self.triage_item(i, s))
                .collect(),
        }
    }

    /// Records a manual decision for a cell. Cells that are not warnings
    /// need override mode.
    pub fn resolve(
        &mut self,
        item_id: &str,
        system_name: &str,
        decision: Decision,
        annotator: &str,
        note: Option<String>,
        idempotency_key: Option<String>,
    ) -> Result<(AnnotationRecord, bool), SessionError> {
        let unknown = || SessionError::UnknownCell(item_id.to_string(), system_name.to_string());
        let i = self.effective.item_index(item_id).ok_or_else(unknown)?;
        let s = self.effective.system_index(system_name).ok_or_else(unknown)?;
        if let Some(LogEntry::Annotation(existing)) = idempotency_key.as_deref().and_then(|k| self.log.find_by_key(k)) {
            return Ok((existing.clone(), false));
        }
        if !self.allow_override && !self.effective.at(i, s).is_warning() {
            return Err(SessionError::NotAWarning(item_id.to_string(), system_name.to_string()));
        }
        if annotator.trim().is_empty() {
            return Err(SessionError::Invalid("annotator is required".into()));
        }
        let record = self
            .log
            .record_annotation(item_id, system_name, decision, annotator, note, idempotency_key)?;
        let matched = self.automatic.at(i, s).matched_rules.clone();
        self.effective.set_at(
            i,
            s,
            Verdict {
                outcome: decision.outcome(),
                matched_rules: matched,
                provenance: tqh::Provenance::Manual,
            },
        );
        self.stale = true;
        Ok((record, true))
    }

    /// Appends a rule to an item and re-classifies its cells. Returns the
    /// refinement and every cell whose effective verdict changed.
    pub fn refine(
        &mut self,
        item_id: &str,
        rule: Rule,
        annotator: &str,
        idempotency_key: Option<String>,
    ) -> Result<(RuleRefinement, Vec<CellChange>, bool), SessionError> {
        let i = self
            .suite
            .position(item_id)
            .ok_or_else(|| SessionError::UnknownItem(item_id.to_string()))?;
        if let Some(LogEntry::Refinement(existing)) = idempotency_key.as_deref().and_then(|k| self.log.find_by_key(k)) {
            return Ok((existing.clone(), Vec::new(), false));
        }
        if annotator.trim().is_empty() {
            return Err(SessionError::Invalid("annotator is required".into()));
        }
        // Validate before anything reaches the log.
        let suite = self.suite.with_added_rule(item_id, rule.clone())?;
        let refinement = self.log.record_refinement(item_id, rule, annotator, idempotency_key)?;

        let rules = compile_rules(&suite.items()[i])?;
        let mut automatic = self.automatic.clone();
        for (s, out) in self.outputs.iter().enumerate() {
            let verdict = match out.get(item_id) {
                Some(text) => classify(text, &rules),
                None => Verdict::automatic(Outcome::Fail, Vec::new()),
            };
            automatic.set_at(i, s, verdict);
        }
        let (effective, _) = apply_annotations(&automatic, self.log.entries());
        let diff = diff_matrices(&self.effective, &effective);
        self.suite = suite;
        self.automatic = automatic;
        self.effective = effective;
        self.stale = true;
        Ok((refinement, diff, true))
    }

    pub fn report(&self, scope: Scope) -> Result<Report, SessionError> {
        let run = &self.run;
        let clusters = cluster_rows(run, scope, &self.significance)?;
        let items_cluster = items_cluster_row(run, &self.significance)?;
        let cells = |cs: &[tqh::AccuracyCell]| -> Vec<ReportCell> {
            cs.iter()
                .map(|c| ReportCell {
                    correct: c.correct,
                    total: c.total,
                    accuracy: c.accuracy(),
                })
                .collect()
        };
        let rows = run
            .table(scope)
            .rows
            .iter()
            .zip(clusters)
            .map(|(row, cluster)| ReportRow {
                label: row.label.clone(),
                category: row.category.clone(),
                items: row.items,
                cells: cells(&row.cells),
                best_cluster: cluster.best_cluster,
            })
            .collect();
        let micro: Vec<tqh::AccuracyCell> = items_cluster.cells.iter().map(|(_, c)| *c).collect();
        let warnings_total = self.automatic.warning_count();
        let resolved = self
            .automatic
            .iter()
            .filter(|(item, system, v)| {
                v.is_warning() && !self.effective.get(item, system).is_some_and(Verdict::is_warning)
            })
            .count();
        Ok(Report {
            scope,
            systems: run.systems.clone(),
            rows,
            items_row: ReportRow {
                label: items_cluster.label.clone(),
                category: String::new(),
                items: run.valid_items.len() as u64,
                cells: cells(&micro),
                best_cluster: items_cluster.best_cluster,
            },
            categories_average: run.systems.iter().map(|s| run.macro_average(s).ok()).collect(),
            valid_items: run.valid_items.len(),
            total_items: run.items.len(),
            warning_rate: run.warning_rate(),
            item_warning_rate: item_warning_rate(&run.verdicts),
            warnings_total,
            warnings_remaining: self.warnings_remaining(),
            progress: if warnings_total == 0 {
                1.0
            } else {
                resolved as f64 / warnings_total as f64
            },
            stale: self.stale,
        })
    }

    /// The suite as loaded, before any refinements from the log.
    pub fn base_suite(&self) -> &TestSuite {
        &self.base_suite
    }
}

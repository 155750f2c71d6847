//! Suite × systems evaluation: classification of every cell, the
//! warning-free common item set, and accuracy tables.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{apply_annotations, apply_refinements, LogEntry, ReplayReport};
use crate::error::{Error, Result};
use crate::rules::{classify, compile_suite, Outcome, Verdict};
use crate::suite::{SystemOutput, TestSuite};

/// Verdicts for every (item, system) cell, stored row-major by item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct VerdictMatrix {
    items: Vec<String>,
    systems: Vec<String>,
    cells: Vec<Verdict>,
    item_pos: HashMap<String, usize>,
    system_pos: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    items: Vec<String>,
    systems: Vec<String>,
    rows: Vec<Vec<Verdict>>,
}

impl From<VerdictMatrix> for MatrixRepr {
    fn from(m: VerdictMatrix) -> Self {
        let width = m.systems.len().max(1);
        let rows = if m.systems.is_empty() {
            vec![Vec::new(); m.items.len()]
        } else {
            m.cells.chunks(width).map(<[Verdict]>::to_vec).collect()
        };
        MatrixRepr {
            items: m.items,
            systems: m.systems,
            rows,
        }
    }
}

impl TryFrom<MatrixRepr> for VerdictMatrix {
    type Error = String;

    fn try_from(r: MatrixRepr) -> std::result::Result<Self, String> {
        if r.rows.len() != r.items.len() || r.rows.iter().any(|row| row.len() != r.systems.len())
        {
            return Err("verdict matrix shape does not match its labels".into());
        }
        VerdictMatrix::new(r.items, r.systems, r.rows.into_iter().flatten().collect())
            .map_err(|e| e.to_string())
    }
}

impl VerdictMatrix {
    pub fn new(items: Vec<String>, systems: Vec<String>, cells: Vec<Verdict>) -> Result<Self> {
        if cells.len() != items.len() * systems.len() {
            return Err(Error::InvalidRecord(format!(
                "{} cells for {} items × {} systems",
                cells.len(),
                items.len(),
                systems.len()
            )));
        }
        let mut item_pos = HashMap::with_capacity(items.len());
        for (i, id) in items.iter().enumerate() {
            if item_pos.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut system_pos = HashMap::with_capacity(systems.len());
        for (i, name) in systems.iter().enumerate() {
            if system_pos.insert(name.clone(), i).is_some() {
                return Err(Error::DuplicateSystem(name.clone()));
            }
        }
        Ok(VerdictMatrix {
            items,
            systems,
            cells,
            item_pos,
            system_pos,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.item_pos.get(item_id).copied()
    }

    pub fn system_index(&self, system: &str) -> Option<usize> {
        self.system_pos.get(system).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn at(&self, item: usize, system: usize) -> &Verdict {
        &self.cells[item * self.systems.len() + system]
    }

    pub fn set_at(&mut self, item: usize, system: usize, verdict: Verdict) {
        let width = self.systems.len();
        self.cells[item * width + system] = verdict;
    }

    pub fn get(&self, item_id: &str, system: &str) -> Option<&Verdict> {
        Some(self.at(self.item_index(item_id)?, self.system_index(system)?))
    }

    pub fn row(&self, item: usize) -> &[Verdict] {
        let width = self.systems.len();
        &self.cells[item * width..(item + 1) * width]
    }

    /// `(item_id, system, verdict)` in item-then-system order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &Verdict)> {
        let width = self.systems.len();
        self.cells.iter().enumerate().map(move |(i, v)| {
            (
                self.items[i / width].as_str(),
                self.systems[i % width].as_str(),
                v,
            )
        })
    }

    pub fn warning_count(&self) -> usize {
        self.cells.iter().filter(|v| v.is_warning()).count()
    }
}

/// Fraction of cells holding a warning (micro over all cells).
pub fn warning_rate(verdicts: &VerdictMatrix) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    verdicts.warning_count() as f64 / verdicts.len() as f64
}

/// Warning rate of each system's column.
pub fn warning_rate_by_system(verdicts: &VerdictMatrix) -> IndexMap<String, f64> {
    let n_items = verdicts.items().len();
    verdicts
        .systems()
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let warnings = (0..n_items).filter(|&i| verdicts.at(i, s).is_warning()).count();
            let rate = if n_items == 0 {
                0.0
            } else {
                warnings as f64 / n_items as f64
            };
            (name.clone(), rate)
        })
        .collect()
}

/// Fraction of items with a warning for at least one system.
pub fn item_warning_rate(verdicts: &VerdictMatrix) -> f64 {
    let n = verdicts.items().len();
    if n == 0 {
        return 0.0;
    }
    (n - select_valid_items(verdicts).len()) as f64 / n as f64
}

/// Items whose whole row is free of warnings, in matrix order.
pub fn select_valid_items(verdicts: &VerdictMatrix) -> Vec<String> {
    verdicts
        .items()
        .iter()
        .enumerate()
        .filter(|(i, _)| !verdicts.row(*i).iter().any(Verdict::is_warning))
        .map(|(_, id)| id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// A missing translation is an error.
    #[default]
    Strict,
    /// A missing translation is scored as a failure.
    Fail,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(MissingPolicy::Strict),
            "fail" => Ok(MissingPolicy::Fail),
            other => Err(Error::Config(format!(
                "unknown missing-output policy `{other}` (expected strict or fail)"
            ))),
        }
    }
}

/// How items with warnings are removed from accuracy denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// An item with a warning for any system is dropped for all systems.
    #[default]
    Global,
    /// Each system drops only its own warning cells. Non-canonical; meant
    /// for suite debugging. Rows then have unequal totals and cannot be
    /// clustered.
    PerSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Category,
    Phenomenon,
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "category" => Ok(Scope::Category),
            "phenomenon" => Ok(Scope::Phenomenon),
            other => Err(Error::Config(format!(
                "unknown scope `{other}` (expected category or phenomenon)"
            ))),
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scope::Category => "category",
            Scope::Phenomenon => "phenomenon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvaluateOptions {
    pub missing: MissingPolicy,
    pub denominator: DenominatorMode,
    /// Classification worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub correct: u64,
    pub total: u64,
}

impl AccuracyCell {
    pub fn new(correct: u64, total: u64) -> Self {
        debug_assert!(correct <= total);
        AccuracyCell { correct, total }
    }

    /// `correct / total`, or `None` when the cell has no items.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    pub fn is_defined(&self) -> bool {
        self.total > 0
    }

    fn add(&mut self, other: AccuracyCell) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// Owning category; equals `label` for category rows.
    pub category: String,
    /// Valid items in the row.
    pub items: u64,
    /// One cell per system, in run system order.
    pub cells: Vec<AccuracyCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub scope: Scope,
    pub rows: Vec<TableRow>,
}

impl AccuracyTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemInfo {
    pub id: String,
    pub category: String,
    pub phenomenon: String,
}

/// A complete evaluation: verdicts plus everything derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub suite_name: String,
    pub suite_version: String,
    pub systems: Vec<String>,
    pub items: Vec<ItemInfo>,
    pub denominator: DenominatorMode,
    pub verdicts: VerdictMatrix,
    pub valid_items: Vec<String>,
    pub phenomenon_table: AccuracyTable,
    pub category_table: AccuracyTable,
    /// SHA-256 of each system's outputs in canonical TSV form.
    pub output_checksums: IndexMap<String, String>,
    pub annotations_applied: usize,
    pub annotations_dangling: usize,
}

/// Hex SHA-256 of an output set's canonical serialization.
pub fn output_checksum(output: &SystemOutput) -> String {
    let digest = Sha256::digest(output.to_tsv().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_systems(outputs: &[SystemOutput]) -> Result<()> {
    let mut seen = HashSet::new();
    for out in outputs {
        if out.system_name.trim().is_empty() {
            return Err(Error::EmptySystemName);
        }
        if !seen.insert(out.system_name.as_str()) {
            return Err(Error::DuplicateSystem(out.system_name.clone()));
        }
    }
    Ok(())
}

/// Classifies every (item, system) cell automatically.
pub fn classify_all(
    suite: &TestSuite,
    outputs: &[SystemOutput],
    options: &EvaluateOptions,
) -> Result<VerdictMatrix> {
    check_systems(outputs)?;
    if options.missing == MissingPolicy::Strict {
        for out in outputs {
            if let Some(item) = suite.items().iter().find(|it| out.get(&it.id).is_none()) {
                return Err(Error::MissingTranslation {
                    system: out.system_name.clone(),
                    item_id: item.id.clone(),
                });
            }
        }
    }
    let compiled = compile_suite(suite)?;

    let classify_row = |rules: &crate::rules::CompiledRuleSet| -> Vec<Verdict> {
        outputs
            .iter()
            .map(|out| match out.get(&rules.item_id) {
                Some(text) => classify(text, rules),
                None => Verdict::automatic(Outcome::Fail, Vec::new()),
            })
            .collect()
    };
    let rows: Vec<Vec<Verdict>> = match options.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| compiled.par_iter().map(classify_row).collect())
        }
        None => compiled.par_iter().map(classify_row).collect(),
    };

    VerdictMatrix::new(
        suite.items().iter().map(|it| it.id.clone()).collect(),
        outputs.iter().map(|o| o.system_name.clone()).collect(),
        rows.into_iter().flatten().collect(),
    )
}

/// Full pipeline: applies the log's rule refinements, classifies every
/// cell, replays the log's manual decisions, and derives the tables.
pub fn evaluate(
    suite: &TestSuite,
    outputs: &[SystemOutput],
    log: &[LogEntry],
    options: &EvaluateOptions,
) -> Result<EvaluationRun> {
    let refinements: Vec<_> = log
        .iter()
        .filter_map(|e| match e {
            LogEntry::Refinement(r) => Some(r.clone()),
            _ => None,
        })
        .collect();
    let refined;
    let suite = if refinements.is_empty() {
        suite
    } else {
        refined = apply_refinements(suite, &refinements)?;
        &refined
    };
    let automatic = classify_all(suite, outputs, options)?;
    let (verdicts, report) = apply_annotations(&automatic, log);
    let checksums = outputs
        .iter()
        .map(|o| (o.system_name.clone(), output_checksum(o)))
        .collect();
    let mut run = EvaluationRun::from_verdicts(suite, verdicts, options.denominator, checksums)?;
    run.record_replay(&report);
    Ok(run)
}

impl EvaluationRun {
    /// Derives valid items and tables from a complete verdict matrix.
    pub fn from_verdicts(
        suite: &TestSuite,
        verdicts: VerdictMatrix,
        denominator: DenominatorMode,
        output_checksums: IndexMap<String, String>,
    ) -> Result<Self> {
        if verdicts.items().len() != suite.len()
            || suite
                .items()
                .iter()
                .zip(verdicts.items())
                .any(|(it, id)| &it.id != id)
        {
            return Err(Error::InvalidRecord(
                "verdict matrix items do not match the suite".into(),
            ));
        }
        let items: Vec<ItemInfo> = suite
            .items()
            .iter()
            .map(|it| ItemInfo {
                id: it.id.clone(),
                category: it.category.clone(),
                phenomenon: it.phenomenon.clone(),
            })
            .collect();
        let valid_items = select_valid_items(&verdicts);
        let (phenomenon_table, category_table) =
            build_tables(suite, &verdicts, &valid_items, denominator);
        Ok(EvaluationRun {
            suite_name: suite.name().to_string(),
            suite_version: suite.version().to_string(),
            systems: verdicts.systems().to_vec(),
            items,
            denominator,
            verdicts,
            valid_items,
            phenomenon_table,
            category_table,
            output_checksums,
            annotations_applied: 0,
            annotations_dangling: 0,
        })
    }

    pub(crate) fn record_replay(&mut self, report: &ReplayReport) {
        self.annotations_applied = report.applied;
        self.annotations_dangling = report.dangling.len();
    }

    pub fn table(&self, scope: Scope) -> &AccuracyTable {
        match scope {
            Scope::Category => &self.category_table,
            Scope::Phenomenon => &self.phenomenon_table,
        }
    }

    pub fn system_index(&self, system: &str) -> Result<usize> {
        self.systems
            .iter()
            .position(|s| s == system)
            .ok_or_else(|| Error::UnknownSystem(system.to_string()))
    }

    pub fn phenomenon_accuracy(&self, phenomenon: &str, system: &str) -> Result<AccuracyCell> {
        let s = self.system_index(system)?;
        self.phenomenon_table
            .row(phenomenon)
            .map(|r| r.cells[s])
            .ok_or_else(|| Error::UnknownPhenomenon(phenomenon.to_string()))
    }

    pub fn category_accuracy(&self, category: &str, system: &str) -> Result<AccuracyCell> {
        let s = self.system_index(system)?;
        self.category_table
            .row(category)
            .map(|r| r.cells[s])
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    /// Pooled accuracy over all valid items.
    pub fn micro_average(&self, system: &str) -> Result<AccuracyCell> {
        let s = self.system_index(system)?;
        Ok(self.micro_at(s))
    }

    pub(crate) fn micro_at(&self, s: usize) -> AccuracyCell {
        let mut acc = AccuracyCell::default();
        for row in &self.category_table.rows {
            acc.add(row.cells[s]);
        }
        acc
    }

    /// Unweighted mean of the system's defined category accuracies.
    pub fn macro_average(&self, system: &str) -> Result<f64> {
        let s = self.system_index(system)?;
        self.macro_at(s)
            .ok_or_else(|| Error::Undefined(format!("no category has valid items for `{system}`")))
    }

    pub(crate) fn macro_at(&self, s: usize) -> Option<f64> {
        mean(self.category_table.rows.iter().filter_map(|r| r.cells[s].accuracy()))
    }

    pub fn warning_rate(&self) -> f64 {
        warning_rate(&self.verdicts)
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty() || self.systems.is_empty()
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn build_tables(
    suite: &TestSuite,
    verdicts: &VerdictMatrix,
    valid_items: &[String],
    mode: DenominatorMode,
) -> (AccuracyTable, AccuracyTable) {
    let valid: HashSet<&str> = valid_items.iter().map(String::as_str).collect();
    let n_sys = verdicts.systems().len();
    let mut phenomenon_rows = Vec::new();
    let mut category_rows = Vec::new();

    for (category, phenomena) in suite.category_index() {
        let mut cat_cells = vec![AccuracyCell::default(); n_sys];
        let mut cat_items = 0;
        for (phenomenon, ids) in phenomena {
            let mut cells = vec![AccuracyCell::default(); n_sys];
            let mut row_items = 0;
            for id in ids {
                let i = verdicts.item_index(id).expect("suite item in matrix");
                let globally_valid = valid.contains(id.as_str());
                if mode == DenominatorMode::Global && !globally_valid {
                    continue;
                }
                row_items += 1;
                for (s, cell) in cells.iter_mut().enumerate() {
                    let v = verdicts.at(i, s);
                    if v.is_warning() {
                        continue;
                    }
                    cell.total += 1;
                    if v.outcome.is_pass() {
                        cell.correct += 1;
                    }
                }
            }
            for (acc, cell) in cat_cells.iter_mut().zip(&cells) {
                acc.add(*cell);
            }
            cat_items += row_items;
            phenomenon_rows.push(TableRow {
                label: phenomenon.clone(),
                category: category.clone(),
                items: row_items,
                cells,
            });
        }
        category_rows.push(TableRow {
            label: category.clone(),
            category: category.clone(),
            items: cat_items,
            cells: cat_cells,
        });
    }

    (
        AccuracyTable {
            scope: Scope::Phenomenon,
            rows: phenomenon_rows,
        },
        AccuracyTable {
            scope: Scope::Category,
            rows: category_rows,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::WarningReason;
    use crate::suite::{Rule, TestItem};

    fn item(id: &str, cat: &str, phen: &str) -> TestItem {
        TestItem {
            id: id.into(),
            category: cat.into(),
            phenomenon: phen.into(),
            source: "Quelle.".into(),
            rules: vec![Rule::positive_regex("good"), Rule::negative_regex("bad")],
        }
    }

    fn pass() -> Verdict {
        Verdict::automatic(Outcome::Pass, vec![0])
    }
    fn fail() -> Verdict {
        Verdict::automatic(Outcome::Fail, vec![1])
    }
    fn warn() -> Verdict {
        Verdict::automatic(Outcome::Warning(WarningReason::NoMatch), vec![])
    }

    fn matrix(rows: Vec<Vec<Verdict>>) -> VerdictMatrix {
        let n_sys = rows.first().map_or(0, Vec::len);
        VerdictMatrix::new(
            (0..rows.len()).map(|i| format!("i{i}")).collect(),
            (0..n_sys).map(|s| format!("s{s}")).collect(),
            rows.into_iter().flatten().collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_item_single_system() {
        let suite = TestSuite::new("s", "1", vec![item("a", "C", "P")]).unwrap();
        let outputs = vec![SystemOutput::new("sys").with("a", "a good one")];
        let run = evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap();
        assert_eq!(run.valid_items, vec!["a".to_string()]);
        let cell = run.phenomenon_accuracy("P", "sys").unwrap();
        assert_eq!((cell.correct, cell.total), (1, 1));
        assert_eq!(cell.accuracy(), Some(1.0));
    }

    #[test]
    fn warning_in_one_system_excludes_item_for_all() {
        let suite =
            TestSuite::new("s", "1", vec![item("x", "C", "P"), item("y", "C", "P")]).unwrap();
        let outputs = vec![
            SystemOutput::new("A").with("x", "good").with("y", "good"),
            SystemOutput::new("B").with("x", "nothing").with("y", "bad"),
        ];
        let run = evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap();
        assert_eq!(run.valid_items, vec!["y".to_string()]);
        assert_eq!(run.category_accuracy("C", "A").unwrap(), AccuracyCell::new(1, 1));
        assert_eq!(run.category_accuracy("C", "B").unwrap(), AccuracyCell::new(0, 1));
    }

    #[test]
    fn per_system_mode_keeps_other_systems_cells() {
        let suite =
            TestSuite::new("s", "1", vec![item("x", "C", "P"), item("y", "C", "P")]).unwrap();
        let outputs = vec![
            SystemOutput::new("A").with("x", "good").with("y", "good"),
            SystemOutput::new("B").with("x", "nothing").with("y", "bad"),
        ];
        let opts = EvaluateOptions {
            denominator: DenominatorMode::PerSystem,
            ..Default::default()
        };
        let run = evaluate(&suite, &outputs, &[], &opts).unwrap();
        assert_eq!(run.category_accuracy("C", "A").unwrap(), AccuracyCell::new(2, 2));
        assert_eq!(run.category_accuracy("C", "B").unwrap(), AccuracyCell::new(0, 1));
    }

    #[test]
    fn missing_translation_policies() {
        let suite =
            TestSuite::new("s", "1", vec![item("x", "C", "P"), item("y", "C", "P")]).unwrap();
        let outputs = vec![SystemOutput::new("A").with("x", "good")];
        let err = evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingTranslation { ref item_id, .. } if item_id == "y"));

        let opts = EvaluateOptions {
            missing: MissingPolicy::Fail,
            ..Default::default()
        };
        let run = evaluate(&suite, &outputs, &[], &opts).unwrap();
        assert_eq!(run.verdicts.get("y", "A").unwrap().outcome, Outcome::Fail);
        assert_eq!(run.micro_average("A").unwrap(), AccuracyCell::new(1, 2));
    }

    #[test]
    fn duplicate_system_names_are_rejected() {
        let suite = TestSuite::new("s", "1", vec![item("x", "C", "P")]).unwrap();
        let outputs = vec![
            SystemOutput::new("A").with("x", "good"),
            SystemOutput::new("A").with("x", "bad"),
        ];
        assert!(matches!(
            evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap_err(),
            Error::DuplicateSystem(_)
        ));
    }

    #[test]
    fn valid_items_without_warnings() {
        let m = matrix(vec![vec![pass(), fail()], vec![fail(), fail()]]);
        assert_eq!(select_valid_items(&m), vec!["i0", "i1"]);
        let m = matrix(vec![vec![pass(), warn()], vec![fail(), fail()]]);
        assert_eq!(select_valid_items(&m), vec!["i1"]);
    }

    #[test]
    fn warning_rates() {
        assert_eq!(warning_rate(&matrix(vec![vec![pass(), fail()]])), 0.0);
        let mut rows = vec![vec![pass()]; 9];
        rows.push(vec![warn()]);
        let m = matrix(rows);
        assert!((warning_rate(&m) - 0.1).abs() < 1e-12);
        assert!((item_warning_rate(&m) - 0.1).abs() < 1e-12);
        assert!((warning_rate_by_system(&m)["s0"] - 0.1).abs() < 1e-12);
    }

    fn counts_run(rows: &[(&str, &str, u64, u64)]) -> EvaluationRun {
        // (category, phenomenon, passes, items) for a single system.
        let mut items = Vec::new();
        let mut output = SystemOutput::new("sys");
        for (cat, phen, passes, n) in rows {
            for k in 0..*n {
                let id = format!("{phen}-{k}");
                output = output.with(&id, if k < *passes { "good" } else { "bad" });
                items.push(item(&id, cat, phen));
            }
        }
        let suite = TestSuite::new("s", "1", items).unwrap();
        evaluate(&suite, &[output], &[], &EvaluateOptions::default()).unwrap()
    }

    #[test]
    fn phenomenon_accuracy_nineteen_of_twenty() {
        let run = counts_run(&[("Negation", "Negation", 19, 20)]);
        let cell = run.phenomenon_accuracy("Negation", "sys").unwrap();
        assert_eq!(cell.accuracy(), Some(0.95));
        assert!(matches!(
            run.phenomenon_accuracy("Idioms", "sys").unwrap_err(),
            Error::UnknownPhenomenon(_)
        ));
    }

    #[test]
    fn zero_valid_items_give_undefined_cell() {
        let suite = TestSuite::new("s", "1", vec![item("x", "C", "P")]).unwrap();
        let outputs = vec![SystemOutput::new("A").with("x", "neither")];
        let run = evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap();
        let cell = run.phenomenon_accuracy("P", "A").unwrap();
        assert_eq!(cell.accuracy(), None);
        assert!(run.macro_average("A").is_err());
    }

    #[test]
    fn category_pools_items() {
        let run = counts_run(&[("C", "P1", 10, 10), ("C", "P2", 0, 10)]);
        assert_eq!(run.category_accuracy("C", "sys").unwrap().accuracy(), Some(0.5));
        let single = counts_run(&[("Punctuation", "Quotation marks", 60, 60)]);
        assert_eq!(
            single.category_accuracy("Punctuation", "sys").unwrap(),
            single.phenomenon_accuracy("Quotation marks", "sys").unwrap()
        );
        assert!(matches!(
            run.category_accuracy("Nope", "sys").unwrap_err(),
            Error::UnknownCategory(_)
        ));
    }

    #[test]
    fn micro_and_macro_on_single_category() {
        let run = counts_run(&[("C", "P1", 3, 4), ("C", "P2", 1, 4)]);
        assert_eq!(run.micro_average("sys").unwrap(), AccuracyCell::new(4, 8));
        assert_eq!(run.macro_average("sys").unwrap(), 0.5);
    }

    #[test]
    fn micro_differs_from_macro_across_categories() {
        let run = counts_run(&[("A", "P1", 9, 10), ("B", "P2", 1, 2)]);
        assert_eq!(run.micro_average("sys").unwrap(), AccuracyCell::new(10, 12));
        assert!((run.macro_average("sys").unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let items: Vec<_> = (0..40).map(|i| item(&format!("i{i}"), "C", "P")).collect();
        let suite = TestSuite::new("s", "1", items).unwrap();
        let out = (0..40).fold(SystemOutput::new("A"), |o, i| {
            o.with(format!("i{i}"), ["good", "bad", "none", "good bad"][i % 4])
        });
        let base = classify_all(&suite, &[out.clone()], &EvaluateOptions::default()).unwrap();
        for workers in [1, 2, 7] {
            let opts = EvaluateOptions {
                workers: Some(workers),
                ..Default::default()
            };
            assert_eq!(classify_all(&suite, &[out.clone()], &opts).unwrap(), base);
        }
    }

    #[test]
    fn matrix_serde_round_trip() {
        let m = matrix(vec![vec![pass(), warn()], vec![fail(), pass()]]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<VerdictMatrix>(&json).unwrap(), m);
    }
}

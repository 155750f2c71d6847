//! Two-proportion significance tests, best-system clusters and cross-run
//! accuracy deltas.
//!
//! Systems in one run are scored on the same items, but the test below
//! treats their proportions as independent samples. A paired test would be
//! more powerful; the unpaired one is kept because it is what the published
//! tables were built with.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::evaluator::{mean, AccuracyCell, EvaluationRun, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    /// Pooled estimate under H0: p1 = p2.
    #[default]
    Pooled,
    /// Separate estimates per sample; for sensitivity checks.
    Unpooled,
}

/// One-tailed significance settings. `alpha` is the confidence level
/// (0.95 by default), so the critical value is its standard-normal quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub alpha: f64,
    pub critical_z: f64,
    pub variance: Variance,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig::new(0.95).expect("default alpha is valid")
    }
}

impl SignificanceConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let normal = Normal::standard();
        Ok(SignificanceConfig {
            alpha,
            critical_z: normal.inverse_cdf(alpha),
            variance: Variance::Pooled,
        })
    }

    pub fn with_variance(mut self, variance: Variance) -> Self {
        self.variance = variance;
        self
    }

    /// Overrides the critical value directly (alpha is kept for reference).
    pub fn with_critical_z(mut self, critical_z: f64) -> Self {
        self.critical_z = critical_z;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub z: f64,
    pub significant: bool,
}

/// Tests whether proportion `x1/n1` is greater than `x2/n2`.
///
/// A zero variance estimate (for pooling: both samples all-success or
/// all-failure) yields `z = 0`, never significant.
pub fn z_test(x1: u64, n1: u64, x2: u64, n2: u64, cfg: &SignificanceConfig) -> Result<ZTest> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::ZeroTrials);
    }
    for (x, n) in [(x1, n1), (x2, n2)] {
        if x > n {
            return Err(Error::SuccessesExceedTrials {
                successes: x,
                trials: n,
            });
        }
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = x1 as f64 / n1f;
    let p2 = x2 as f64 / n2f;
    let variance = match cfg.variance {
        Variance::Pooled => {
            let p = (x1 + x2) as f64 / (n1f + n2f);
            p * (1.0 - p) * (1.0 / n1f + 1.0 / n2f)
        }
        Variance::Unpooled => p1 * (1.0 - p1) / n1f + p2 * (1.0 - p2) / n2f,
    };
    let z = if variance > 0.0 {
        (p1 - p2) / variance.sqrt()
    } else {
        0.0
    };
    Ok(ZTest {
        z,
        significant: z > cfg.critical_z,
    })
}

/// Systems not significantly worse than the row's best system, in row order.
///
/// Every row entry must have the same total, as it does for rows of one run.
pub fn best_cluster(row: &[(String, AccuracyCell)], cfg: &SignificanceConfig) -> Result<Vec<String>> {
    let (_, first) = row.first().ok_or(Error::EmptyRow)?;
    let n = first.total;
    if row.iter().any(|(_, c)| c.total != n) {
        return Err(Error::UnequalTotals(
            row.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(", "),
        ));
    }
    let best = row.iter().map(|(_, c)| c.correct).max().unwrap_or(0);
    let mut cluster = Vec::new();
    for (system, cell) in row {
        if !z_test(best, n, cell.correct, n, cfg)?.significant {
            cluster.push(system.clone());
        }
    }
    Ok(cluster)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub label: String,
    pub cells: Vec<(String, AccuracyCell)>,
    /// Empty only when the row has no valid items.
    pub best_cluster: Vec<String>,
}

impl ClusterRow {
    pub fn contains(&self, system: &str) -> bool {
        self.best_cluster.iter().any(|s| s == system)
    }
}

/// Best clusters for every row of the run's `scope` table.
pub fn cluster_rows(run: &EvaluationRun, scope: Scope, cfg: &SignificanceConfig) -> Result<Vec<ClusterRow>> {
    run.table(scope)
        .rows
        .iter()
        .map(|row| {
            let cells: Vec<(String, AccuracyCell)> = run
                .systems
                .iter()
                .cloned()
                .zip(row.cells.iter().copied())
                .collect();
            let best = if cells.iter().all(|(_, c)| c.total == 0) {
                Vec::new()
            } else {
                best_cluster(&cells, cfg).map_err(|e| match e {
                    Error::UnequalTotals(_) => Error::UnequalTotals(row.label.clone()),
                    other => other,
                })?
            };
            Ok(ClusterRow {
                label: row.label.clone(),
                cells,
                best_cluster: best,
            })
        })
        .collect()
}

/// Best cluster over pooled counts of all valid items, labelled
/// `average (items)` so reports can emphasize their footer row.
pub fn items_cluster_row(run: &EvaluationRun, cfg: &SignificanceConfig) -> Result<ClusterRow> {
    let cells: Vec<(String, AccuracyCell)> = (0..run.systems.len())
        .map(|s| (run.systems[s].clone(), run.micro_at(s)))
        .collect();
    let best = if cells.iter().all(|(_, c)| c.total == 0) {
        Vec::new()
    } else {
        best_cluster(&cells, cfg)?
    };
    Ok(ClusterRow {
        label: crate::report::ITEMS_ROW.to_string(),
        cells,
        best_cluster: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub label: String,
    /// Valid items behind the row in the current run.
    pub items: u64,
    /// Percentage-point change per shared system; `None` if either side is
    /// undefined.
    pub deltas: Vec<Option<f64>>,
    /// Mean accuracy over all current systems minus mean over all baseline
    /// systems, in percentage points.
    pub mean_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub scope: Scope,
    /// Systems present in both runs, in current-run order.
    pub systems: Vec<String>,
    pub rows: Vec<DeltaRow>,
    /// Change in pooled accuracy over all valid items.
    pub items_row: DeltaRow,
    /// Change in the unweighted mean of category accuracies.
    pub categories_row: DeltaRow,
    /// Row labels present in only one of the runs.
    pub unmatched_labels: Vec<String>,
    pub baseline_only_systems: Vec<String>,
    pub current_only_systems: Vec<String>,
}

impl DeltaTable {
    pub fn row(&self, label: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn delta(&self, label: &str, system: &str) -> Option<f64> {
        let s = self.systems.iter().position(|x| x == system)?;
        self.row(label)?.deltas[s]
    }
}

fn pp(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(100.0 * (a? - b?))
}

/// Accuracy change from `baseline` to `current`.
///
/// Systems are matched by name. Row means use every system of each run,
/// matched or not.
pub fn compare_runs(baseline: &EvaluationRun, current: &EvaluationRun, scope: Scope) -> Result<DeltaTable> {
    let base_table = baseline.table(scope);
    let cur_table = current.table(scope);

    let shared: Vec<(String, usize, usize)> = current
        .systems
        .iter()
        .enumerate()
        .filter_map(|(ci, name)| {
            baseline
                .systems
                .iter()
                .position(|b| b == name)
                .map(|bi| (name.clone(), bi, ci))
        })
        .collect();

    let mut rows = Vec::new();
    for cur_row in &cur_table.rows {
        let Some(base_row) = base_table.row(&cur_row.label) else {
            continue;
        };
        let deltas = shared
            .iter()
            .map(|(_, bi, ci)| pp(cur_row.cells[*ci].accuracy(), base_row.cells[*bi].accuracy()))
            .collect();
        let mean_delta = pp(
            mean(cur_row.cells.iter().filter_map(AccuracyCell::accuracy)),
            mean(base_row.cells.iter().filter_map(AccuracyCell::accuracy)),
        );
        rows.push(DeltaRow {
            label: cur_row.label.clone(),
            items: cur_row.items,
            deltas,
            mean_delta,
        });
    }
    if rows.is_empty() {
        return Err(Error::DisjointLabels(match scope {
            Scope::Category => "category",
            Scope::Phenomenon => "phenomenon",
        }));
    }

    let unmatched_labels = cur_table
        .rows
        .iter()
        .filter(|r| base_table.row(&r.label).is_none())
        .chain(base_table.rows.iter().filter(|r| cur_table.row(&r.label).is_none()))
        .map(|r| r.label.clone())
        .collect();

    let micro = |run: &EvaluationRun, s: usize| run.micro_at(s).accuracy();
    let items_row = DeltaRow {
        label: "average (items)".into(),
        items: current.valid_items.len() as u64,
        deltas: shared
            .iter()
            .map(|(_, bi, ci)| pp(micro(current, *ci), micro(baseline, *bi)))
            .collect(),
        mean_delta: pp(
            mean((0..current.systems.len()).filter_map(|s| micro(current, s))),
            mean((0..baseline.systems.len()).filter_map(|s| micro(baseline, s))),
        ),
    };
    let categories_row = DeltaRow {
        label: "average (categories)".into(),
        items: current.valid_items.len() as u64,
        deltas: shared
            .iter()
            .map(|(_, bi, ci)| pp(current.macro_at(*ci), baseline.macro_at(*bi)))
            .collect(),
        mean_delta: pp(
            mean((0..current.systems.len()).filter_map(|s| current.macro_at(s))),
            mean((0..baseline.systems.len()).filter_map(|s| baseline.macro_at(s))),
        ),
    };

    let only = |a: &EvaluationRun, b: &EvaluationRun| -> Vec<String> {
        a.systems
            .iter()
            .filter(|s| !b.systems.contains(s))
            .cloned()
            .collect()
    };

    Ok(DeltaTable {
        scope,
        systems: shared.into_iter().map(|(name, _, _)| name).collect(),
        rows,
        items_row,
        categories_row,
        unmatched_labels,
        baseline_only_systems: only(baseline, current),
        current_only_systems: only(current, baseline),
    })
}

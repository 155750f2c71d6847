#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use tqh::synthetic::{suite_from_counts, CountRow};
use tqh::{evaluate, EvaluateOptions, EvaluationRun, SystemOutput, TestSuite};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// A published table: one value per system plus an `avg` column.
#[derive(Debug, Clone)]
pub struct Published {
    pub systems: Vec<String>,
    pub rows: Vec<PublishedRow>,
}

#[derive(Debug, Clone)]
pub struct PublishedRow {
    pub label: String,
    pub items: Option<u64>,
    pub values: Vec<f64>,
    pub avg: f64,
}

impl Published {
    pub fn load(file: &str) -> Published {
        let text = fs::read_to_string(data_dir().join(file)).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
        let systems = header[2..header.len() - 1].iter().map(|s| s.to_string()).collect();
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let f: Vec<&str> = line.split('\t').collect();
                let nums: Vec<f64> = f[2..].iter().map(|v| v.parse().unwrap()).collect();
                PublishedRow {
                    label: f[0].to_string(),
                    items: f[1].parse().ok(),
                    values: nums[..nums.len() - 1].to_vec(),
                    avg: *nums.last().unwrap(),
                }
            })
            .collect();
        Published { systems, rows }
    }

    pub fn row(&self, label: &str) -> &PublishedRow {
        self.rows.iter().find(|r| r.label == label).unwrap()
    }

    /// Category rows, without the footers.
    pub fn body(&self) -> impl Iterator<Item = &PublishedRow> {
        self.rows.iter().filter(|r| !r.label.starts_with("average"))
    }

    pub fn column(&self, system: &str) -> usize {
        self.systems.iter().position(|s| s == system).unwrap()
    }
}

pub fn count(percent: f64, items: u64) -> u64 {
    (percent * items as f64 / 100.0).round() as u64
}

pub fn wmt19() -> Published {
    Published::load("wmt19_categories.tsv")
}

pub fn deltas() -> Published {
    Published::load("wmt18_19_category_deltas.tsv")
}

/// Suite and outputs whose counts are `round(accuracy * items)` of every
/// printed cell.
pub fn wmt19_fixture() -> (Published, TestSuite, Vec<SystemOutput>) {
    let published = wmt19();
    let rows: Vec<CountRow> = published
        .body()
        .map(|r| {
            let n = r.items.unwrap();
            CountRow::category(&r.label, n, r.values.iter().map(|v| count(*v, n)).collect())
        })
        .collect();
    let (suite, outputs) = suite_from_counts("wmt19", &rows, &published.systems).unwrap();
    (published, suite, outputs)
}

/// The delta table spells one system differently from the accuracy table.
pub fn wmt19_name(delta_name: &str) -> &str {
    match delta_name {
        "MLLP" => "MMLP",
        other => other,
    }
}

pub struct YearsFixture {
    pub published: Published,
    pub baseline: EvaluationRun,
    pub current: EvaluationRun,
}

/// Per-category count changes for one printed delta column.
///
/// Each change rounds to the printed cell. The largest category takes the
/// value within its rounding window that brings the pooled change closest
/// to the printed items row.
fn pick_changes(delta_table: &Published, column: impl Fn(&PublishedRow) -> f64, scale: i64, items_target: f64) -> Vec<i64> {
    let body: Vec<&PublishedRow> = delta_table.body().collect();
    let total: i64 = body.iter().map(|r| r.items.unwrap() as i64).sum();
    let mut ks: Vec<i64> = body
        .iter()
        .map(|r| (scale as f64 * column(r) * r.items.unwrap() as f64 / 100.0).round() as i64)
        .collect();
    let big = (0..body.len()).max_by_key(|&i| body[i].items.unwrap()).unwrap();
    let n = scale * body[big].items.unwrap() as i64;
    let d = column(body[big]);
    let rest: i64 = ks.iter().enumerate().filter(|(i, _)| *i != big).map(|(_, k)| k).sum();
    let start = ks[big];
    ks[big] = (start - 3 * scale..=start + 3 * scale)
        .filter(|k| (100.0 * *k as f64 / n as f64 - d).abs() < 0.05)
        .min_by(|a, b| {
            let err = |k: i64| (100.0 * (rest + k) as f64 / (scale * total) as f64 - items_target).abs();
            err(*a).total_cmp(&err(*b)).then((a - start).abs().cmp(&(b - start).abs()))
        })
        .unwrap();
    ks
}

/// Two runs over the common items of the delta table.
///
/// The current run reproduces the accuracy table on the delta table's item
/// counts. The baseline run has the nine shared systems, shifted by the
/// printed deltas, plus seven baseline-only systems whose counts make the
/// mean column come out as printed.
pub fn years_fixture() -> YearsFixture {
    let published = wmt19();
    let delta_table = deltas();
    let body: Vec<&PublishedRow> = delta_table.body().collect();
    let items_row = delta_table.row("average (items)");

    let current_names: Vec<String> = published
        .systems
        .iter()
        .map(|s| if s == "MMLP" { "MLLP".to_string() } else { s.clone() })
        .collect();
    let current: Vec<Vec<u64>> = body
        .iter()
        .map(|r| {
            let n = r.items.unwrap();
            published.row(&r.label).values.iter().map(|v| count(*v, n)).collect()
        })
        .collect();

    let extra = 7;
    let mut baseline_names = delta_table.systems.clone();
    baseline_names.extend((1..=extra).map(|i| format!("base-{i}")));
    let mut baseline: Vec<Vec<u64>> = vec![Vec::new(); body.len()];
    for (j, system) in delta_table.systems.iter().enumerate() {
        let ks = pick_changes(&delta_table, |r| r.values[j], 1, items_row.values[j]);
        let cur_col = current_names.iter().position(|s| s == system).unwrap();
        for (c, k) in ks.iter().enumerate() {
            let v = current[c][cur_col] as i64 - k;
            assert!((0..=body[c].items.unwrap() as i64).contains(&v), "{system} {}", body[c].label);
            baseline[c].push(v as u64);
        }
    }
    let scale = current_names.len() as i64;
    assert_eq!(scale, baseline_names.len() as i64);
    let mean_changes = pick_changes(&delta_table, |r| r.avg, scale, items_row.avg);
    for (c, row) in body.iter().enumerate() {
        let n = row.items.unwrap() as i64;
        let cur_sum: i64 = current[c].iter().map(|&v| v as i64).sum();
        let shared_sum: i64 = baseline[c].iter().map(|&v| v as i64).sum();
        let need = cur_sum - mean_changes[c] - shared_sum;
        for i in 0..extra {
            let v = need / extra as i64 + i64::from((i as i64) < need % extra as i64);
            assert!((0..=n).contains(&v), "{}", row.label);
            baseline[c].push(v as u64);
        }
    }

    let build = |name: &str, systems: &[String], counts: &[Vec<u64>]| -> EvaluationRun {
        let rows: Vec<CountRow> = body
            .iter()
            .zip(counts)
            .map(|(r, c)| CountRow::category(&r.label, r.items.unwrap(), c.clone()))
            .collect();
        let (suite, outputs) = suite_from_counts(name, &rows, systems).unwrap();
        evaluate(&suite, &outputs, &[], &EvaluateOptions::default()).unwrap()
    };
    YearsFixture {
        baseline: build("wmt18", &baseline_names, &baseline),
        current: build("wmt19", &current_names, &current),
        published: delta_table,
    }
}

pub mod oracle;

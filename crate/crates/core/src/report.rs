//! Text rendering of accuracy and delta tables, and run artifacts on disk.
//!
//! All arithmetic happens on exact counts or unrounded ratios; rounding
//! (half away from zero) is applied only when a number is printed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{mean, AccuracyCell, EvaluationRun, Scope};
use crate::stats::{ClusterRow, DeltaRow, DeltaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Plain,
    Tsv,
    Latex,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Format::Plain),
            "tsv" => Ok(Format::Tsv),
            "latex" => Ok(Format::Latex),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected plain, tsv, latex or markdown)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub scope: Scope,
    pub format: Format,
    /// Mark best-cluster members.
    pub emphasis: bool,
    pub decimals: usize,
}

impl Default for ReportSpec {
    fn default() -> Self {
        ReportSpec {
            scope: Scope::Category,
            format: Format::Plain,
            emphasis: true,
            decimals: 1,
        }
    }
}

impl ReportSpec {
    pub fn new(scope: Scope, format: Format) -> Self {
        ReportSpec {
            scope,
            format,
            ..Default::default()
        }
    }

    pub fn emphasis(mut self, on: bool) -> Self {
        self.emphasis = on;
        self
    }

    pub fn decimals(mut self, decimals: usize) -> Self {
        self.decimals = decimals;
        self
    }
}

pub const UNDEFINED: &str = "–";
pub const ITEMS_ROW: &str = "average (items)";
pub const CATEGORIES_ROW: &str = "average (categories)";

fn insert_point(mut digits: String, decimals: usize) -> String {
    if decimals == 0 {
        return digits;
    }
    while digits.len() <= decimals {
        digits.insert(0, '0');
    }
    digits.insert(digits.len() - decimals, '.');
    digits
}

/// `100 · correct / total` rounded half-up, computed in integers.
pub fn format_percent_exact(cell: AccuracyCell, decimals: usize) -> Option<String> {
    if cell.total == 0 {
        return None;
    }
    let scale = 10u128.pow(decimals as u32);
    let scaled = cell.correct as u128 * 100 * scale;
    let t = cell.total as u128;
    let q = (2 * scaled + t) / (2 * t);
    Some(insert_point(q.to_string(), decimals))
}

/// Formats a real number rounded half away from zero, without `-0`.
pub fn format_signed(value: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    // The small bias absorbs binary representation error at exact halves.
    let magnitude = (value.abs() * scale + 0.5 + 1e-9).floor() as u128;
    let text = insert_point(magnitude.to_string(), decimals);
    if value < 0.0 && magnitude != 0 {
        format!("-{text}")
    } else {
        text
    }
}

#[derive(Debug, Clone)]
struct Cell {
    text: String,
    strong: bool,
}

impl Cell {
    fn plain(text: impl Into<String>) -> Self {
        Cell {
            text: text.into(),
            strong: false,
        }
    }
}

struct Grid {
    header: Vec<String>,
    body: Vec<Vec<Cell>>,
    footer: Vec<Vec<Cell>>,
}

fn latex_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(ch);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '\\' => out.push_str("\\textbackslash{}"),
            c => out.push(c),
        }
    }
    out
}

fn render_grid(grid: &Grid, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Plain => {
            let cell_text = |c: &Cell| {
                if c.strong {
                    format!("{}*", c.text)
                } else {
                    c.text.clone()
                }
            };
            let all_rows: Vec<Vec<String>> = std::iter::once(grid.header.clone())
                .chain(
                    grid.body
                        .iter()
                        .chain(&grid.footer)
                        .map(|r| r.iter().map(cell_text).collect()),
                )
                .collect();
            let cols = grid.header.len();
            let widths: Vec<usize> = (0..cols)
                .map(|c| {
                    all_rows
                        .iter()
                        .map(|r| r.get(c).map_or(0, |s| s.chars().count()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            for row in &all_rows {
                let mut line = String::new();
                for (c, text) in row.iter().enumerate() {
                    let pad = widths[c] - text.chars().count();
                    if c == 0 {
                        line.push_str(text);
                        line.push_str(&" ".repeat(pad));
                    } else {
                        line.push_str("  ");
                        line.push_str(&" ".repeat(pad));
                        line.push_str(text);
                    }
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
        }
        Format::Tsv => {
            out.push_str(&grid.header.join("\t"));
            out.push('\n');
            for row in grid.body.iter().chain(&grid.footer) {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| {
                        if c.strong {
                            format!("{}*", c.text)
                        } else {
                            c.text.clone()
                        }
                    })
                    .collect();
                out.push_str(&cells.join("\t"));
                out.push('\n');
            }
        }
        Format::Markdown => {
            let _ = writeln!(out, "| {} |", grid.header.join(" | "));
            let align: Vec<&str> = (0..grid.header.len())
                .map(|c| if c == 0 { "---" } else { "---:" })
                .collect();
            let _ = writeln!(out, "| {} |", align.join(" | "));
            for row in grid.body.iter().chain(&grid.footer) {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| {
                        if c.strong {
                            format!("**{}**", c.text)
                        } else {
                            c.text.clone()
                        }
                    })
                    .collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
        }
        Format::Latex => {
            let spec: String = std::iter::once('l')
                .chain(std::iter::repeat('r').take(grid.header.len().saturating_sub(1)))
                .collect();
            let latex_row = |row: &[Cell]| -> String {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| {
                        let text = if c.text == UNDEFINED {
                            "--".to_string()
                        } else {
                            latex_escape(&c.text)
                        };
                        if c.strong {
                            format!("\\textbf{{{text}}}")
                        } else {
                            text
                        }
                    })
                    .collect();
                format!("{} \\\\\n", cells.join(" & "))
            };
            let _ = writeln!(out, "\\begin{{tabular}}{{{spec}}}");
            out.push_str("\\toprule\n");
            let header: Vec<Cell> = grid.header.iter().map(Cell::plain).collect();
            out.push_str(&latex_row(&header));
            out.push_str("\\midrule\n");
            for row in &grid.body {
                out.push_str(&latex_row(row));
            }
            if !grid.footer.is_empty() {
                out.push_str("\\midrule\n");
                for row in &grid.footer {
                    out.push_str(&latex_row(row));
                }
            }
            out.push_str("\\bottomrule\n\\end{tabular}\n");
        }
    }
    out
}

fn percent_cell(cell: AccuracyCell, decimals: usize, strong: bool) -> Cell {
    match format_percent_exact(cell, decimals) {
        Some(text) => Cell { text, strong },
        None => Cell::plain(UNDEFINED),
    }
}

fn ratio_cell(value: Option<f64>, decimals: usize, strong: bool) -> Cell {
    match value {
        Some(v) => Cell {
            text: format_signed(100.0 * v, decimals),
            strong,
        },
        None => Cell::plain(UNDEFINED),
    }
}

fn find_cluster<'a>(clusters: &'a [ClusterRow], label: &str) -> Option<&'a ClusterRow> {
    clusters.iter().find(|c| c.label == label)
}

/// Renders the run's `spec.scope` table with `#`, per-system accuracies,
/// a row `avg` over systems, and micro/macro footer rows.
///
/// With emphasis on, every table row needs a cluster row of the same
/// label. Footer rows are emphasized only if a cluster row named
/// `average (items)` / `average (categories)` is supplied.
pub fn render_accuracy_table(run: &EvaluationRun, clusters: &[ClusterRow], spec: &ReportSpec) -> Result<String> {
    let d = spec.decimals;
    let strong = |label: &str, system: &str, required: bool| -> Result<bool> {
        if !spec.emphasis {
            return Ok(false);
        }
        match find_cluster(clusters, label) {
            Some(c) => Ok(c.contains(system)),
            None if required => Err(Error::MissingClusterRow(label.to_string())),
            None => Ok(false),
        }
    };

    let mut header = vec![spec.scope.to_string(), "#".to_string()];
    header.extend(run.systems.iter().cloned());
    header.push("avg".into());

    let mut body = Vec::new();
    for row in &run.table(spec.scope).rows {
        let mut cells = vec![Cell::plain(&row.label), Cell::plain(row.items.to_string())];
        for (system, cell) in run.systems.iter().zip(&row.cells) {
            cells.push(percent_cell(*cell, d, strong(&row.label, system, true)?));
        }
        let avg = mean(row.cells.iter().filter_map(AccuracyCell::accuracy));
        cells.push(ratio_cell(avg, d, false));
        body.push(cells);
    }

    let n_sys = run.systems.len();
    let mut items_row = vec![
        Cell::plain(ITEMS_ROW),
        Cell::plain(run.valid_items.len().to_string()),
    ];
    for (s, system) in run.systems.iter().enumerate() {
        items_row.push(percent_cell(run.micro_at(s), d, strong(ITEMS_ROW, system, false)?));
    }
    items_row.push(ratio_cell(
        mean((0..n_sys).filter_map(|s| run.micro_at(s).accuracy())),
        d,
        false,
    ));

    let mut categories_row = vec![
        Cell::plain(CATEGORIES_ROW),
        Cell::plain(run.valid_items.len().to_string()),
    ];
    for (s, system) in run.systems.iter().enumerate() {
        categories_row.push(ratio_cell(run.macro_at(s), d, strong(CATEGORIES_ROW, system, false)?));
    }
    categories_row.push(ratio_cell(mean((0..n_sys).filter_map(|s| run.macro_at(s))), d, false));

    let grid = Grid {
        header,
        body,
        footer: vec![items_row, categories_row],
    };
    Ok(render_grid(&grid, spec.format))
}

fn delta_cells(row: &DeltaRow, decimals: usize, with_items: bool) -> Vec<Cell> {
    let mut cells = vec![
        Cell::plain(&row.label),
        Cell::plain(if with_items {
            row.items.to_string()
        } else {
            String::new()
        }),
    ];
    for delta in &row.deltas {
        cells.push(match delta {
            Some(v) => Cell::plain(format_signed(*v, decimals)),
            None => Cell::plain(UNDEFINED),
        });
    }
    cells.push(match row.mean_delta {
        Some(v) => Cell::plain(format_signed(v, decimals)),
        None => Cell::plain(UNDEFINED),
    });
    cells
}

/// Renders signed percentage-point changes with the per-row mean last.
pub fn render_delta_table(deltas: &DeltaTable, spec: &ReportSpec) -> String {
    let mut header = vec![deltas.scope.to_string(), "#".to_string()];
    header.extend(deltas.systems.iter().cloned());
    header.push("avg".into());
    let grid = Grid {
        header,
        body: deltas
            .rows
            .iter()
            .map(|r| delta_cells(r, spec.decimals, true))
            .collect(),
        footer: vec![
            delta_cells(&deltas.items_row, spec.decimals, true),
            delta_cells(&deltas.categories_row, spec.decimals, false),
        ],
    };
    render_grid(&grid, spec.format)
}

pub const RUN_FILE: &str = "run.json";

fn counts_tsv(run: &EvaluationRun, scope: Scope) -> String {
    let mut out = String::new();
    let mut header = vec![scope.to_string()];
    if scope == Scope::Phenomenon {
        header.push("category".into());
    }
    header.push("items".into());
    for system in &run.systems {
        header.push(format!("{system}_correct"));
        header.push(format!("{system}_total"));
    }
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in &run.table(scope).rows {
        let mut fields = vec![row.label.clone()];
        if scope == Scope::Phenomenon {
            fields.push(row.category.clone());
        }
        fields.push(row.items.to_string());
        for cell in &row.cells {
            fields.push(cell.correct.to_string());
            fields.push(cell.total.to_string());
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

fn verdicts_tsv(run: &EvaluationRun) -> String {
    let mut out = String::from("item_id\tsystem\tstatus\twarning_reason\tprovenance\tmatched_rules\n");
    for (item, system, v) in run.verdicts.iter() {
        let reason = v
            .warning_reason()
            .map(|r| serde_json::to_value(r).unwrap().as_str().unwrap().to_string())
            .unwrap_or_default();
        let status = serde_json::to_value(v.status()).unwrap();
        let provenance = serde_json::to_value(v.provenance).unwrap();
        let matched: Vec<String> = v.matched_rules.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{item}\t{system}\t{}\t{reason}\t{}\t{}",
            status.as_str().unwrap(),
            provenance.as_str().unwrap(),
            matched.join(",")
        );
    }
    out
}

/// Serializes the run deterministically (same run, same bytes).
pub fn run_to_json(run: &EvaluationRun) -> Result<String> {
    let mut text = serde_json::to_string_pretty(run)?;
    text.push('\n');
    Ok(text)
}

/// Writes `run.json` plus TSV exports of both tables and all verdicts.
pub fn export_run(run: &EvaluationRun, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if run.is_empty() {
        return Err(Error::EmptyRun);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (RUN_FILE, run_to_json(run)?),
        ("categories.tsv", counts_tsv(run, Scope::Category)),
        ("phenomena.tsv", counts_tsv(run, Scope::Phenomenon)),
        ("verdicts.tsv", verdicts_tsv(run)),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_run(dir: impl AsRef<Path>) -> Result<EvaluationRun> {
    let path = dir.as_ref().join(RUN_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

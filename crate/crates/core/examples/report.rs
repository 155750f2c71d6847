//! Builds a small run from known counts and renders it in every format,
//! with the best systems of each row emphasized.
//!
//!     cargo run -p tqh --example report

use tqh::stats::items_cluster_row;
use tqh::synthetic::{suite_from_counts, CountRow};
use tqh::{
    cluster_rows, evaluate, render_accuracy_table, EvaluateOptions, Format, ReportSpec, Scope,
    SignificanceConfig,
};

fn main() -> tqh::Result<()> {
    let systems: Vec<String> = ["alpha", "beta", "gamma"].iter().map(|s| s.to_string()).collect();
    let rows = [
        CountRow::category("Ambiguity", 80, vec![72, 70, 51]),
        CountRow::category("Negation", 60, vec![60, 60, 57]),
        CountRow::category("Punctuation", 120, vec![70, 101, 98]),
    ];
    let (suite, outputs) = suite_from_counts("demo", &rows, &systems)?;
    let run = evaluate(&suite, &outputs, &[], &EvaluateOptions::default())?;

    let cfg = SignificanceConfig::default();
    let mut clusters = cluster_rows(&run, Scope::Category, &cfg)?;
    clusters.push(items_cluster_row(&run, &cfg)?);
    for format in [Format::Plain, Format::Markdown, Format::Latex] {
        let spec = ReportSpec::new(Scope::Category, format);
        println!("{}", render_accuracy_table(&run, &clusters, &spec)?);
    }
    Ok(())
}

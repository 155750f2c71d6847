//! Year-over-year change of the systems two runs have in common.
//!
//!     cargo run -p tqh --example compare

use tqh::synthetic::{suite_from_counts, CountRow};
use tqh::{compare_runs, evaluate, render_delta_table, EvaluateOptions, Format, ReportSpec, Scope};

fn run(systems: &[&str], rows: &[CountRow]) -> tqh::Result<tqh::EvaluationRun> {
    let systems: Vec<String> = systems.iter().map(|s| s.to_string()).collect();
    let (suite, outputs) = suite_from_counts("demo", rows, &systems)?;
    evaluate(&suite, &outputs, &[], &EvaluateOptions::default())
}

fn main() -> tqh::Result<()> {
    let baseline = run(
        &["alpha", "beta", "retired"],
        &[
            CountRow::category("Ambiguity", 50, vec![30, 35, 20]),
            CountRow::category("Negation", 40, vec![36, 30, 25]),
        ],
    )?;
    let current = run(
        &["alpha", "beta", "newcomer"],
        &[
            CountRow::category("Ambiguity", 50, vec![38, 33, 45]),
            CountRow::category("Negation", 40, vec![39, 36, 40]),
        ],
    )?;
    let deltas = compare_runs(&baseline, &current, Scope::Category)?;
    print!("{}", render_delta_table(&deltas, &ReportSpec::new(Scope::Category, Format::Plain).decimals(2)));
    Ok(())
}

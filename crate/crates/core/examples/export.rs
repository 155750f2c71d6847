//! Writes a run directory and reads it back.
//!
//!     cargo run -p tqh --example export -- [DIR]

use std::path::PathBuf;

use tqh::suite::load_outputs_dir;
use tqh::{evaluate, export_run, load_run, load_suite, EvaluateOptions};

fn main() -> tqh::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/example");
    let suite = load_suite(data.join("suite.jsonl"))?;
    let outputs = load_outputs_dir(data.join("outputs"), &suite)?;
    let run = evaluate(&suite, &outputs, &[], &EvaluateOptions::default())?;

    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tqh-example-run"));
    for path in export_run(&run, &dir)? {
        println!("wrote {}", path.display());
    }
    assert_eq!(load_run(&dir)?, run);
    println!("reloaded run matches");
    Ok(())
}

//! Labels the example outputs with the rules of each item.
//!
//!     cargo run -p tqh --example classify

use std::path::Path;

use tqh::suite::load_outputs_dir;
use tqh::{classify, compile_rules, load_suite};

fn main() -> tqh::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/example");
    let suite = load_suite(data.join("suite.jsonl"))?;
    let outputs = load_outputs_dir(data.join("outputs"), &suite)?;

    for item in suite.items() {
        let rules = compile_rules(item)?;
        println!("{} [{} / {}]: {}", item.id, item.category, item.phenomenon, item.source);
        for out in &outputs {
            let text = &out.translations[&item.id];
            let verdict = classify(text, &rules);
            println!("  {:<9} {:?} (rules {:?})  {text}", out.system_name, verdict.outcome, verdict.matched_rules);
        }
    }
    Ok(())
}

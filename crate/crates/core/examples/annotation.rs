//! Resolving warnings by hand and by adding rules, then replaying the log.
//!
//!     cargo run -p tqh --example annotation

use std::path::Path;

use tqh::annotation::{diff_matrices, read_log};
use tqh::evaluator::classify_all;
use tqh::suite::load_outputs_dir;
use tqh::{apply_refinements, evaluate, load_suite, AnnotationLog, Decision, EvaluateOptions, Rule};

fn main() -> tqh::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/example");
    let suite = load_suite(data.join("suite.jsonl"))?;
    let mut outputs = load_outputs_dir(data.join("outputs"), &suite)?;
    // Paraphrases the rules did not anticipate.
    outputs[1].translations.insert("amb-001".into(), "The meal last night was delicious.".into());
    outputs[1].translations.insert("sub-001".into(), "He would go shopping if the shops were still open.".into());

    let opts = EvaluateOptions::default();
    let before = evaluate(&suite, &outputs, &[], &opts)?;
    println!("warnings: {}, valid items: {}", before.verdicts.warning_count(), before.valid_items.len());

    let dir = tempfile::tempdir().map_err(|e| tqh::Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("annotations.jsonl");
    let mut log = AnnotationLog::open(&path)?;

    // A reusable rule for the first paraphrase.
    let refinement = log.record_refinement("amb-001", Rule::positive_regex(r"\bmeal\b"), "ann", None)?;
    let refined = apply_refinements(&suite, &[refinement])?;
    for change in diff_matrices(&before.verdicts, &classify_all(&refined, &outputs, &opts)?) {
        println!(
            "{} / {}: {:?} -> {:?}",
            change.item_id, change.system_name, change.before.outcome, change.after.outcome
        );
    }
    // A one-off judgement for the second.
    log.record_annotation("sub-001", "sys-pass", Decision::Pass, "ann", Some("same meaning".into()), None)?;
    drop(log);

    let after = evaluate(&suite, &outputs, &read_log(&path)?, &opts)?;
    println!(
        "after replay: warnings {}, valid items {}, manual decisions {}",
        after.verdicts.warning_count(),
        after.valid_items.len(),
        after.annotations_applied
    );
    Ok(())
}

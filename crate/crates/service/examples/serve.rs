//! Serves the example suite with one system whose outputs no rule
//! anticipated, so the queue has something in it.
//!
//!     cargo run -p tqh-service --example serve -- 127.0.0.1:8080
//!     curl localhost:8080/api/warnings

use std::path::Path;

use tqh::suite::load_outputs_dir;
use tqh::{load_suite, AnnotationLog, EvaluateOptions, SystemOutput};
use tqh_service::{serve, ServiceOptions, Session};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into()).parse()?;
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/example");
    let suite = load_suite(data.join("suite.jsonl"))?;
    let mut outputs = load_outputs_dir(data.join("outputs"), &suite)?;
    outputs.push(
        SystemOutput::new("sys-new")
            .with("amb-001", "The meal last night was delicious.")
            .with("sub-001", "He would have gone shopping had the shops been open.")
            .with("vtam-001", "There was much celebrating and dancing."),
    );
    let session = Session::new(suite, outputs, AnnotationLog::in_memory(), EvaluateOptions::default())?;
    println!("{} warnings open on http://{addr}", session.warnings_remaining());
    serve(addr, session, ServiceOptions::default()).await?;
    Ok(())
}

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tqh::annotation::read_log;
use tqh::config::{Config, ConfigLayer, CONFIG_FILE};
use tqh::evaluator::item_warning_rate;
use tqh::stats::items_cluster_row;
use tqh::suite::load_outputs_dir;
use tqh::{
    cluster_rows, compare_runs, evaluate, export_run, load_run, load_suite, render_accuracy_table,
    render_delta_table, suite_stats, DenominatorMode, EvaluateOptions, Format, MissingPolicy, ReportSpec, Scope,
};
use tqh_service::{ServiceOptions, Session, SessionError, DEFAULT_LOG};

const META_FILE: &str = "meta.json";

#[derive(Parser)]
#[command(name = "tqh", version, about = "Rule-based test-suite evaluation of translation outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every output and write a run directory.
    Evaluate(EvaluateArgs),
    /// Render accuracy tables from a run directory.
    Report(ReportArgs),
    /// Per-row differences between two runs.
    Compare(CompareArgs),
    /// Serve the warning queue over HTTP.
    Triage(TriageArgs),
    /// Check a suite file and print its composition.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Directory of `<system>.tsv` files, optionally with a manifest.jsonl.
    #[arg(long)]
    outputs: Option<PathBuf>,
    /// Annotation log to replay; triage appends to it.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// `strict` rejects absent outputs, `fail` scores them as failures.
    #[arg(long, value_parser = parse_missing)]
    missing: Option<MissingPolicy>,
    /// Drop an item only from the systems that have a warning on it.
    #[arg(long)]
    per_system_denominator: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, value_parser = parse_scope)]
    scope: Option<Scope>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    #[arg(long)]
    no_emphasis: bool,
    #[arg(long, default_value_t = 1)]
    decimals: usize,
    /// One-tailed confidence level of the significance test.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    current: PathBuf,
    #[arg(long, value_parser = parse_scope)]
    scope: Option<Scope>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    #[arg(long, default_value_t = 2)]
    decimals: usize,
}

#[derive(Args)]
struct TriageArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Allow re-annotating cells that are already resolved.
    #[arg(long = "override")]
    allow_override: bool,
    /// Directory with the built triage UI.
    #[arg(long)]
    ui: Option<PathBuf>,
    /// Answer 409 on stale reports instead of recomputing them.
    #[arg(long)]
    no_auto_recompute: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    suite: PathBuf,
}

fn parse_missing(s: &str) -> Result<MissingPolicy, String> {
    s.parse().map_err(|e: tqh::Error| e.to_string())
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    s.parse().map_err(|e: tqh::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: tqh::Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<tqh::Error> for Failure {
    fn from(e: tqh::Error) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Core(e) => e.into(),
            other => Failure {
                code: 2,
                message: other.to_string(),
            },
        }
    }
}

type CliResult = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    tqh::Error::io(path, e).into()
}

fn layers(run_dir: &Path, flags: ConfigLayer) -> Result<ConfigLayer, Failure> {
    let env = ConfigLayer::from_env()?;
    let file = ConfigLayer::from_file(run_dir.join(CONFIG_FILE))?;
    Ok(flags.over(env).over(file))
}

fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(path).map_err(|e| io_failure(path, e))
}

fn run_evaluate(args: EvaluateArgs) -> CliResult {
    let flags = ConfigLayer {
        suite: args.suite,
        outputs: args.outputs,
        annotations: args.annotations,
        missing: args.missing,
        workers: args.workers,
        ..Default::default()
    };
    let explicit_log = flags.annotations.is_some();
    let merged = layers(&args.out, flags)?;
    let config = Config::resolve(merged.clone(), ConfigLayer::default(), ConfigLayer::default())?;
    let suite_path = config.suite.clone().ok_or_else(|| Failure::usage("no suite given (--suite or TQH_SUITE)"))?;
    let outputs_path = config
        .outputs
        .clone()
        .ok_or_else(|| Failure::usage("no outputs given (--outputs or TQH_OUTPUTS)"))?;

    let suite = load_suite(&suite_path)?;
    let outputs = load_outputs_dir(&outputs_path, &suite)?;
    let log = match &config.annotations {
        // A log named by an earlier run may not have been started yet.
        Some(path) if explicit_log || path.exists() => read_log(path)?,
        _ => Vec::new(),
    };
    let options = EvaluateOptions {
        missing: config.missing,
        denominator: if args.per_system_denominator {
            DenominatorMode::PerSystem
        } else {
            DenominatorMode::Global
        },
        workers: config.workers,
    };
    let run = evaluate(&suite, &outputs, &log, &options)?;
    export_run(&run, &args.out)?;

    // Everything a later `report` or `triage` needs to find its inputs.
    let pinned = ConfigLayer {
        suite: Some(absolute(&suite_path)?),
        outputs: Some(absolute(&outputs_path)?),
        annotations: Some(absolute(&config.annotations.unwrap_or_else(|| args.out.join(DEFAULT_LOG)))?),
        missing: Some(config.missing),
        ..merged
    };
    let config_path = args.out.join(CONFIG_FILE);
    fs::write(&config_path, pinned.to_toml()).map_err(|e| io_failure(&config_path, e))?;
    let meta = serde_json::json!({
        "created_at": chrono::Utc::now().to_rfc3339(),
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let meta_path = args.out.join(META_FILE);
    fs::write(&meta_path, format!("{meta:#}\n")).map_err(|e| io_failure(&meta_path, e))?;

    println!(
        "{} items x {} systems: {} valid items, {:.1}% of cells and {:.1}% of items with warnings, {} annotations applied",
        run.items.len(),
        run.systems.len(),
        run.valid_items.len(),
        100.0 * run.warning_rate(),
        100.0 * item_warning_rate(&run.verdicts),
        run.annotations_applied,
    );
    Ok(())
}

fn run_report(args: ReportArgs) -> CliResult {
    let flags = ConfigLayer {
        scope: args.scope,
        format: args.format,
        alpha: args.alpha,
        ..Default::default()
    };
    let config = Config::resolve(layers(&args.run, flags)?, ConfigLayer::default(), ConfigLayer::default())?;
    let run = load_run(&args.run)?;
    let mut clusters = cluster_rows(&run, config.scope, &config.significance)?;
    clusters.push(items_cluster_row(&run, &config.significance)?);
    let spec = ReportSpec::new(config.scope, config.format)
        .emphasis(!args.no_emphasis)
        .decimals(args.decimals);
    print!("{}", render_accuracy_table(&run, &clusters, &spec)?);
    Ok(())
}

fn run_compare(args: CompareArgs) -> CliResult {
    let flags = ConfigLayer {
        scope: args.scope,
        format: args.format,
        ..Default::default()
    };
    let config = Config::resolve(layers(&args.current, flags)?, ConfigLayer::default(), ConfigLayer::default())?;
    let baseline = load_run(&args.baseline)?;
    let current = load_run(&args.current)?;
    let deltas = compare_runs(&baseline, &current, config.scope)?;
    let spec = ReportSpec::new(config.scope, config.format).decimals(args.decimals);
    print!("{}", render_delta_table(&deltas, &spec));
    Ok(())
}

fn resolve_listen(listen: &str) -> Result<SocketAddr, Failure> {
    listen
        .to_socket_addrs()
        .ok()
        .and_then(|mut addrs| addrs.next())
        .ok_or_else(|| Failure::usage(format!("cannot resolve listen address `{listen}`")))
}

fn run_triage(args: TriageArgs) -> CliResult {
    let addr = resolve_listen(&args.listen)?;
    let session = Session::from_run_dir(&args.run)?.with_override(args.allow_override);
    let remaining = session.warnings_remaining();
    let options = ServiceOptions {
        auto_recompute: !args.no_auto_recompute,
        ui_dir: args.ui,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: 3,
        message: e.to_string(),
    })?;
    eprintln!("serving {remaining} open warnings on http://{addr}");
    runtime
        .block_on(tqh_service::serve(addr, session, options))
        .map_err(|e| Failure {
            code: 3,
            message: format!("{addr}: {e}"),
        })
}

fn run_validate(args: ValidateArgs) -> CliResult {
    let suite = load_suite(&args.suite)?;
    let stats = suite_stats(&suite);
    let phenomena: usize = stats.categories.values().map(|c| c.phenomena.len()).sum();
    let rules: usize = suite.items().iter().map(|i| i.rules.len()).sum();
    println!(
        "{}: {} items, {} categories, {} phenomena, {} rules",
        args.suite.display(),
        stats.total,
        stats.categories.len(),
        phenomena,
        rules
    );
    for (category, c) in &stats.categories {
        println!("  {category}\t{}", c.items);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Evaluate(args) => run_evaluate(args),
        Command::Report(args) => run_report(args),
        Command::Compare(args) => run_compare(args),
        Command::Triage(args) => run_triage(args),
        Command::Validate(args) => run_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mindprobe::backends::{Backend, BackendSpec};
use mindprobe::dataset::{self, Dataset};
use mindprobe::domain::{validate_episode, EvalRecord, QueryKind};
use mindprobe::envs::BuiltinEnv;
use mindprobe::policies;
use mindprobe::runner::{self, journal, plan, RunControl, RunPlan};
use mindprobe::tasks;

const EXIT_OK: u8 = 0;
const EXIT_HARD: u8 = 1;
const EXIT_PARTIAL: u8 = 3;

/// Probe language models on how well they model RL agents and their
/// environments.
#[derive(Parser)]
#[command(name = "mindprobe", version)]
#[command(after_help = "Exit codes: 0 success, 1 hard error, 2 usage error, 3 partial failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log filter, e.g. `info` or `mindprobe=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate episodes of a built-in task and write a dataset file.
    Collect(CollectArgs),
    /// Validate an externally recorded dataset and rewrite it with a fresh manifest.
    Ingest(IngestArgs),
    /// Resolve a plan and print its query counts without calling any backend.
    Plan(PlanArgs),
    /// Run a plan, resuming from the journal in its output directory.
    Run(RunArgs),
    /// Review journaled records by hand.
    Annotate(AnnotateArgs),
    /// Rebuild the metrics table and plot series from a run directory.
    Report(ReportArgs),
    /// Check a dataset and/or plan without writing anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CollectArgs {
    /// Built-in task: mountaincar, acrobot or pendulum.
    #[arg(long)]
    task: String,
    #[arg(long)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncate episodes at this many steps (default: the task limit).
    #[arg(long)]
    max_steps: Option<usize>,
    /// `scripted` (default), `random`, or the scripted controller's name.
    #[arg(long)]
    policy: Option<String>,
    /// Output file (default: <task>.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Registry task name; defaults to the name in the file's manifest.
    #[arg(long, conflicts_with = "task_spec")]
    task: Option<String>,
    /// TOML task description for tasks outside the registry.
    #[arg(long)]
    task_spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanSource {
    /// TOML run plan.
    #[arg(long, required_unless_present = "default_suite", conflicts_with = "default_suite")]
    plan: Option<PathBuf>,
    /// Use the built-in suite: MountainCar, Acrobot and Pendulum with every applicable kind.
    #[arg(long = "default")]
    default_suite: bool,
    /// Replace the plan's backends: oracle, random[:SEED], replay:FILE or remote:CONFIG.
    #[arg(long = "backend")]
    backends: Vec<BackendSpec>,
    /// Override the plan's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl PlanSource {
    fn load(&self) -> Result<RunPlan, runner::RunError> {
        let mut p = match &self.plan {
            Some(path) => RunPlan::load(path)?,
            None => RunPlan::default_suite(BackendSpec::Oracle),
        };
        if !self.backends.is_empty() {
            p.backends = self.backends.clone();
        }
        if let Some(o) = &self.output {
            p.output_dir = o.clone();
        }
        Ok(p)
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    source: PlanSource,
    /// Also write the effective plan as TOML.
    #[arg(long)]
    write: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: PlanSource,
    #[arg(long)]
    workers: Option<usize>,
    /// Stop after journaling this many new records (testing aid).
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Run directory containing journal.jsonl.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    kind: Option<QueryKind>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Review at most this many records.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value = "reviewer")]
    reviewer: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    /// Where to write the reports (default: the run directory).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, required_unless_present = "plan")]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    task_spec: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
}

type CmdResult = Result<u8, Box<dyn std::error::Error>>;

fn collect(a: CollectArgs) -> CmdResult {
    let env = BuiltinEnv::for_task(&a.task)?;
    let policy = policies::by_name(a.policy.as_deref(), env, a.seed)?;
    let ds = dataset::collect(env, policy.as_ref(), a.episodes, a.seed, a.max_steps)?;
    let out = a
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.jsonl", env.name().to_ascii_lowercase())));
    ds.save(&out)?;
    println!("{}", serde_json::to_string_pretty(&ds.manifest)?);
    eprintln!("wrote {} episodes to {}", ds.episodes.len(), out.display());
    Ok(EXIT_OK)
}

fn ingest(a: IngestArgs) -> CmdResult {
    let spec = match (&a.task_spec, &a.task) {
        (Some(p), _) => plan::load_task_spec(p)?,
        (None, Some(name)) => tasks::lookup(name).cloned().ok_or_else(|| format!("unknown task `{name}`"))?,
        (None, None) => {
            let probe = Dataset::load(&a.input)?;
            probe.task
        }
    };
    let ds = dataset::ingest_external(&a.input, &spec)?;
    ds.save(&a.out)?;
    eprintln!("ingested {} episodes ({} steps) into {}", ds.episodes.len(), ds.total_steps(), a.out.display());
    Ok(EXIT_OK)
}

fn plan_cmd(a: PlanArgs) -> CmdResult {
    let p = a.source.load()?;
    let resolved = p.resolve()?;
    let counts = runner::query_counts(&resolved)?;
    let per_backend: usize = counts.iter().map(|c| c.queries * c.prompt_configs).sum();
    let summary = serde_json::json!({
        "backends": p.backends.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "datasets": resolved.datasets.iter().map(|d| serde_json::json!({
            "task": d.dataset.task.name,
            "episodes": d.dataset.episodes.len(),
            "lengths": d.dataset.manifest.lengths,
            "content_hash": d.content_hash,
        })).collect::<Vec<_>>(),
        "cells": counts,
        "total_queries": per_backend * p.backends.len(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(path) = a.write {
        std::fs::write(&path, p.to_toml())?;
        eprintln!("wrote plan to {}", path.display());
    }
    Ok(EXIT_OK)
}

fn run_cmd(a: RunArgs) -> CmdResult {
    let mut p = a.source.load()?;
    if let Some(w) = a.workers {
        p.workers = w;
    }
    let resolved = p.resolve()?;
    let transcript = p.output_dir.join(runner::TRANSCRIPT_FILE);
    let backends = p
        .backends
        .iter()
        .map(|b| b.build(Some(&transcript)))
        .collect::<Result<Vec<Box<dyn Backend>>, _>>()?;
    let outcome = runner::run(
        &resolved,
        &backends,
        RunControl {
            stop_after: a.stop_after,
        },
    )?;
    eprintln!(
        "{} queries: {} resumed, {} completed now, {} failed{}",
        outcome.total_queries,
        outcome.resumed,
        outcome.completed_now,
        outcome.failures.len(),
        if outcome.interrupted { " (stopped early)" } else { "" }
    );
    eprintln!("reports in {}", p.output_dir.display());
    for f in &outcome.failures {
        eprintln!("failed {} [{}]: {}", f.query_id, f.error, f.message);
    }
    Ok(if outcome.is_complete() { EXIT_OK } else { EXIT_PARTIAL })
}

fn annotate_cmd(a: AnnotateArgs) -> CmdResult {
    let (records, _) = journal::read_entries::<EvalRecord>(&a.run.join(runner::JOURNAL_FILE))?;
    let mut queue: Vec<EvalRecord> = records
        .into_iter()
        .filter(|r| a.kind.is_none_or(|k| r.query.kind == k))
        .filter(|r| a.task.as_deref().is_none_or(|t| tasks::same_name(t, &r.query.task)))
        .filter(|r| a.model.as_deref().is_none_or(|m| m == r.model))
        .collect();
    if let Some(n) = a.limit {
        queue.truncate(n);
    }
    let summary = runner::annotate(
        &queue,
        &a.run.join(runner::annotate::ANNOTATIONS_FILE),
        &a.reviewer,
        io::stdin().lock(),
        io::stdout().lock(),
    )?;
    eprintln!(
        "annotated {} now, {} earlier, {} remaining",
        summary.annotated_now, summary.already_done, summary.remaining
    );
    Ok(EXIT_OK)
}

fn report_cmd(a: ReportArgs) -> CmdResult {
    let out = a.output.unwrap_or_else(|| a.run.clone());
    let rows = runner::report_run_dir(&a.run, &out)?;
    eprintln!("{} metric rows written to {}", rows.len(), out.join(runner::report::METRICS_FILE).display());
    Ok(EXIT_OK)
}

fn validate_dataset(path: &Path, spec: Option<&Path>) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let ds = match spec {
        Some(s) => dataset::ingest_external(path, &plan::load_task_spec(s)?)?,
        None => Dataset::load(path)?,
    };
    Ok(ds
        .episodes
        .iter()
        .flat_map(|ep| validate_episode(ep, &ds.task).into_iter().map(move |v| format!("episode {}: {v}", ep.id)))
        .collect())
}

fn validate(a: ValidateArgs) -> CmdResult {
    let mut problems = Vec::new();
    if let Some(d) = &a.dataset {
        match validate_dataset(d, a.task_spec.as_deref()) {
            Ok(v) => problems.extend(v),
            Err(e) => problems.push(format!("{}: {e}", d.display())),
        }
    }
    if let Some(p) = &a.plan {
        if let Err(e) = RunPlan::load(p).and_then(|plan| plan.resolve().map(|_| ())) {
            problems.push(format!("{}: {e}", p.display()));
        }
    }
    if problems.is_empty() {
        println!("ok");
        Ok(EXIT_OK)
    } else {
        for p in &problems {
            println!("{p}");
        }
        Ok(EXIT_HARD)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Collect(a) => collect(a),
        Command::Ingest(a) => ingest(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_HARD)
        }
    }
}

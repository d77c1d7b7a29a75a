//! Runs a plan end to end: enumerate queries, render, dispatch to backends,
//! parse, score, journal, aggregate and report.
//!
//! The journal (`journal.jsonl`) is the source of truth. A rerun of the same
//! plan skips every (model, query, config) key already journaled, so an
//! interrupted run resumes without repeating backend calls. Records reach the
//! journal in plan order regardless of which worker finished first.

pub mod annotate;
pub mod journal;
pub mod plan;
pub mod report;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::{Deserialize, Serialize};

use crate::backends::{AnswerKey, Backend, BackendError, BackendRequest};
use crate::dataset::{enumerate_queries, DatasetError, QueryOptions};
use crate::domain::{record_key, EvalQuery, EvalRecord};
use crate::metrics::{score_answer, Aggregator, GroupKey, MetricResult};
use crate::parsing::parse_response;
use crate::prompting::{render, PromptConfig, PromptError};

pub use annotate::{annotate, apply_annotations, Annotation, AnnotateSummary};
pub use journal::Journal;
pub use plan::{DatasetRef, ResolvedManifest, ResolvedPlan, RunPlan};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const FAILURES_FILE: &str = "failures.json";
pub const RESOLVED_PLAN_FILE: &str = "plan.resolved.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("plan error: {0}")]
    Plan(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
    #[error("journal error: {0}")]
    Journal(String),
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
}

impl RunError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    }
}

/// A query whose backend call failed; it is not journaled and will be
/// retried by the next run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedQuery {
    pub key: String,
    pub query_id: String,
    pub model: String,
    pub config_fingerprint: String,
    pub group: GroupKey,
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunControl {
    /// Stop after journaling this many new records, as if killed.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Every journaled record of this plan, in plan order.
    pub records: Vec<EvalRecord>,
    pub metrics: Vec<MetricResult>,
    pub failures: Vec<FailedQuery>,
    pub total_queries: usize,
    pub resumed: usize,
    pub completed_now: usize,
    pub interrupted: bool,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        !self.interrupted && self.failures.is_empty()
    }
}

struct Job {
    dataset: usize,
    backend: usize,
    config: Arc<PromptConfig>,
    config_fp: Arc<str>,
    query: Arc<EvalQuery>,
    group: Arc<GroupKey>,
    key: String,
}

enum JobResult {
    Done(Box<EvalRecord>),
    Failed(FailedQuery),
    Fatal(RunError),
}

fn process(job: &Job, plan: &ResolvedPlan, backends: &[Box<dyn Backend>]) -> JobResult {
    let backend = &backends[job.backend];
    let task = &plan.datasets[job.dataset].dataset.task;
    let q = &job.query;
    let prompt = match render(q, task, &job.config) {
        Ok(p) => p,
        Err(e) => return JobResult::Fatal(e.into()),
    };
    let req = BackendRequest {
        query_id: q.query_id.clone(),
        model: backend.id().to_string(),
        system_text: prompt.system_text,
        user_text: prompt.user_text,
        temperature: backend.temperature(),
        max_tokens: backend.max_tokens(),
        fingerprint: prompt.fingerprint.clone(),
        answer_key: backend.needs_answer_key().then(|| AnswerKey {
            kind: q.kind,
            truth: q.truth.clone(),
            action_space: task.action_space.clone(),
            state_dim: task.state_dim,
            action_mode: job.config.action_mode,
        }),
    };
    match backend.complete(&req) {
        Ok(resp) => {
            let parsed = parse_response(&resp.text, q.kind, task, job.config.action_mode);
            let score = score_answer(q, &parsed, task, job.config.action_mode);
            JobResult::Done(Box::new(EvalRecord {
                query: (**q).clone(),
                model: backend.id().to_string(),
                config: (*job.config).clone(),
                prompt_fingerprint: prompt.fingerprint,
                config_fingerprint: job.config_fp.to_string(),
                raw_response: resp.text,
                parsed,
                auto_correct: score.correct,
                element_correct: score.element_correct,
                manual_correct: None,
                error_tags: Vec::new(),
                latency_ms: resp.latency_ms,
            }))
        }
        Err(e) if e.is_fatal() => JobResult::Fatal(e.into()),
        Err(e) => JobResult::Failed(FailedQuery {
            key: job.key.clone(),
            query_id: q.query_id.clone(),
            model: backend.id().to_string(),
            config_fingerprint: job.config_fp.to_string(),
            group: (*job.group).clone(),
            error: e.code().to_string(),
            message: e.to_string(),
        }),
    }
}

fn build_jobs(plan: &ResolvedPlan, backends: &[Box<dyn Backend>]) -> Result<(Vec<Job>, Vec<GroupKey>), RunError> {
    let p = &plan.plan;
    let mut jobs = Vec::new();
    let mut cells = Vec::new();
    for (di, rd) in plan.datasets.iter().enumerate() {
        for &kind in &rd.kinds {
            for &h in &p.h_values {
                let opts = QueryOptions {
                    h,
                    stride: p.stride,
                    limit: p.limit,
                    seed: p.seed,
                    unchanged_epsilon: p.unchanged_epsilon,
                };
                let queries: Vec<Arc<EvalQuery>> =
                    enumerate_queries(&rd.dataset, kind, &opts)?.into_iter().map(Arc::new).collect();
                for (bi, backend) in backends.iter().enumerate() {
                    for cfg in &rd.configs {
                        let config = Arc::new(PromptConfig {
                            history_size: h,
                            ..cfg.clone()
                        });
                        let config_fp: Arc<str> = config.fingerprint().into();
                        let group = Arc::new(GroupKey {
                            task: rd.dataset.task.name.clone(),
                            model: backend.id().to_string(),
                            kind,
                            h,
                            ablation: config.ablation_label(),
                        });
                        cells.push((*group).clone());
                        for q in &queries {
                            jobs.push(Job {
                                dataset: di,
                                backend: bi,
                                key: record_key(backend.id(), &q.query_id, &config_fp),
                                config: config.clone(),
                                config_fp: config_fp.clone(),
                                query: q.clone(),
                                group: group.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok((jobs, cells))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Journal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| RunError::io(path, e))
}

/// Executes `plan` against `backends`, resuming from any existing journal in
/// the plan's output directory, and writes the reports.
pub fn run(plan: &ResolvedPlan, backends: &[Box<dyn Backend>], control: RunControl) -> Result<RunOutcome, RunError> {
    let out_dir = &plan.plan.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::io(out_dir, e))?;
    let ids: Vec<&str> = backends.iter().map(|b| b.id()).collect();
    if let Some(dup) = ids.iter().enumerate().find_map(|(i, id)| ids[..i].contains(id).then_some(*id)) {
        return Err(RunError::Plan(format!("two backends share the model id `{dup}`")));
    }

    let (jobs, cells) = build_jobs(plan, backends)?;
    let manifest = plan.manifest(ids.iter().map(|s| s.to_string()).collect(), jobs.len(), cells.clone());
    write_json(&out_dir.join(RESOLVED_PLAN_FILE), &manifest)?;

    let (mut journal, existing) = Journal::open::<EvalRecord>(&out_dir.join(JOURNAL_FILE))?;
    let mut done: HashMap<String, EvalRecord> = HashMap::new();
    for r in existing {
        done.entry(r.key()).or_insert(r);
    }
    let pending: Vec<&Job> = jobs.iter().filter(|j| !done.contains_key(&j.key)).collect();
    let resumed = jobs.len() - pending.len();
    log::info!(
        "{} queries in plan, {} already journaled, {} to run",
        jobs.len(),
        resumed,
        pending.len()
    );

    let workers = plan.plan.workers.clamp(1, 256).min(pending.len().max(1));
    let next = AtomicUsize::new(0);
    let cancel = AtomicBool::new(false);
    let mut failures: Vec<FailedQuery> = Vec::new();
    let mut new_records: Vec<EvalRecord> = Vec::new();
    let mut interrupted = false;
    let mut fatal: Option<RunError> = None;

    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<(usize, JobResult)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, cancel, pending) = (&next, &cancel, &pending);
            s.spawn(move || loop {
                if cancel.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = pending.get(i) else { break };
                if tx.send((i, process(job, plan, backends))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut held: BTreeMap<usize, JobResult> = BTreeMap::new();
        let mut cursor = 0;
        'recv: for (i, res) in rx {
            held.insert(i, res);
            while let Some(res) = held.remove(&cursor) {
                cursor += 1;
                match res {
                    JobResult::Done(rec) => {
                        if let Err(e) = journal.append(&*rec) {
                            fatal = Some(e);
                            break 'recv;
                        }
                        new_records.push(*rec);
                        if control.stop_after.is_some_and(|n| new_records.len() >= n) {
                            interrupted = true;
                            break 'recv;
                        }
                    }
                    JobResult::Failed(f) => {
                        log::warn!("{} failed: {}", f.query_id, f.message);
                        failures.push(f);
                    }
                    JobResult::Fatal(e) => {
                        fatal = Some(e);
                        break 'recv;
                    }
                }
            }
        }
        cancel.store(true, Ordering::Relaxed);
    });
    if let Some(e) = fatal {
        return Err(e);
    }

    let completed_now = new_records.len();
    for r in new_records {
        done.insert(r.key(), r);
    }
    let mut seen = HashSet::new();
    let records: Vec<EvalRecord> = jobs
        .iter()
        .filter(|j| seen.insert(j.key.as_str()))
        .filter_map(|j| done.get(&j.key).cloned())
        .collect();

    let mut agg = Aggregator::default();
    for c in cells {
        agg.expect(c);
    }
    for r in &records {
        agg.add(r);
    }
    for f in &failures {
        agg.add_failure(f.group.clone());
    }
    let metrics = agg.finish();
    write_json(&out_dir.join(FAILURES_FILE), &failures)?;
    report::write_reports(&metrics, plan.plan.unchanged_epsilon, out_dir)?;

    Ok(RunOutcome {
        records,
        metrics,
        failures,
        total_queries: jobs.len(),
        resumed,
        completed_now,
        interrupted,
    })
}

/// Recomputes metrics and reports from a run directory's journal, failure
/// list and resolved plan. Annotations, when present, are applied and
/// summarized in `agreement.json`.
pub fn report_run_dir(run_dir: &Path, out_dir: &Path) -> Result<Vec<MetricResult>, RunError> {
    let manifest: Option<ResolvedManifest> = match std::fs::read_to_string(run_dir.join(RESOLVED_PLAN_FILE)) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| RunError::Journal(e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(RunError::io(&run_dir.join(RESOLVED_PLAN_FILE), e)),
    };
    let (mut records, _) = journal::read_entries::<EvalRecord>(&run_dir.join(JOURNAL_FILE))?;
    let failures: Vec<FailedQuery> = match std::fs::read_to_string(run_dir.join(FAILURES_FILE)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| RunError::Journal(e.to_string()))?,
        Err(_) => Vec::new(),
    };
    let (annotations, _) = journal::read_entries::<Annotation>(&run_dir.join(annotate::ANNOTATIONS_FILE))?;
    apply_annotations(&mut records, &annotations);

    let mut agg = Aggregator::default();
    let mut epsilon = crate::parsing::DEFAULT_UNCHANGED_EPSILON;
    if let Some(m) = &manifest {
        epsilon = m.plan.unchanged_epsilon;
        for c in &m.cells {
            agg.expect(c.clone());
        }
    }
    for r in &records {
        agg.add(r);
    }
    for f in &failures {
        agg.add_failure(f.group.clone());
    }
    let metrics = agg.finish();
    report::write_reports(&metrics, epsilon, out_dir)?;

    if !annotations.is_empty() {
        let summary = serde_json::json!({
            "agreement": crate::metrics::agreement(&records).ok(),
            "error_histogram": crate::metrics::error_histogram(&records),
        });
        write_json(&out_dir.join("agreement.json"), &summary)?;
    }
    Ok(metrics)
}

/// Queries per (task, kind, h) for one backend and prompt config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    pub task: String,
    pub kind: crate::domain::QueryKind,
    pub h: usize,
    pub queries: usize,
    pub prompt_configs: usize,
}

pub fn query_counts(plan: &ResolvedPlan) -> Result<Vec<CellCount>, RunError> {
    let p = &plan.plan;
    let mut out = Vec::new();
    for rd in &plan.datasets {
        for &kind in &rd.kinds {
            for &h in &p.h_values {
                let opts = QueryOptions {
                    h,
                    stride: p.stride,
                    limit: p.limit,
                    seed: p.seed,
                    unchanged_epsilon: p.unchanged_epsilon,
                };
                out.push(CellCount {
                    task: rd.dataset.task.name.clone(),
                    kind,
                    h,
                    queries: enumerate_queries(&rd.dataset, kind, &opts)?.len(),
                    prompt_configs: rd.configs.len(),
                });
            }
        }
    }
    Ok(out)
}

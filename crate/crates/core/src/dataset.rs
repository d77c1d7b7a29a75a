//! Episode collection, the line-delimited dataset format, and query
//! enumeration over stored episodes.
//!
//! # File format
//!
//! A dataset file is UTF-8 JSON Lines. Line 1 is the manifest:
//!
//! ```text
//! {"type":"manifest","format":"mindprobe-episodes","version":1,"task":"MountainCar",...}
//! ```
//!
//! Each episode follows as one `step` line per time step and a closing `end`
//! line:
//!
//! ```text
//! {"type":"step","episode":0,"t":0,"state":[-0.52,0.0],"action":2,"reward":-1.0}
//! {"type":"end","episode":0,"terminal_state":[...],"terminated":true,"seed":7}
//! ```
//!
//! Floats are written in shortest round-trip form, so a load reproduces the
//! saved values bit for bit. `content_hash` is the SHA-256 of every line after
//! the manifest, newline-terminated; it may be absent in hand-made files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    validate_episode, window, Action, ActionSpace, Episode, EvalQuery, GroundTruth, QueryInputs, QueryKind, Step,
    TaskSpec,
};
use crate::envs::BuiltinEnv;
use crate::parsing::{delta_labels, DEFAULT_UNCHANGED_EPSILON};
use crate::policies::{Policy, StepCtx};
use crate::{rng, tasks};

pub const FORMAT_NAME: &str = "mindprobe-episodes";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("unsupported dataset format version {found} (this build reads {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("simulation error in episode {episode} at step {t}: {reason}")]
    Simulation { episode: usize, t: usize, reason: String },
    #[error("{0}")]
    Precondition(String),
    #[error("dataset failed validation:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub task: String,
    pub policy: String,
    pub n_episodes: usize,
    pub lengths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub state_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub task: TaskSpec,
    pub episodes: Vec<Episode>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Manifest(DatasetManifest),
    Step {
        episode: usize,
        t: usize,
        state: Vec<f64>,
        action: Action,
        reward: f64,
    },
    End {
        episode: usize,
        terminal_state: Option<Vec<f64>>,
        terminated: bool,
        seed: u64,
    },
}

fn body_lines(episodes: &[Episode]) -> Vec<String> {
    let mut out = Vec::new();
    for ep in episodes {
        for s in &ep.steps {
            let line = Line::Step {
                episode: ep.id,
                t: s.t,
                state: s.state.clone(),
                action: s.action.clone(),
                reward: s.reward,
            };
            out.push(serde_json::to_string(&line).expect("step serializes"));
        }
        let end = Line::End {
            episode: ep.id,
            terminal_state: ep.terminal_state.clone(),
            terminated: ep.terminated,
            seed: ep.seed,
        };
        out.push(serde_json::to_string(&end).expect("end serializes"));
    }
    out
}

fn hash_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// SHA-256 over the serialized episode lines.
pub fn content_hash(episodes: &[Episode]) -> String {
    let lines = body_lines(episodes);
    hash_lines(lines.iter().map(String::as_str))
}

impl Dataset {
    /// Wraps episodes with a freshly computed manifest.
    pub fn from_episodes(task: TaskSpec, policy: &str, episodes: Vec<Episode>) -> Self {
        let manifest = DatasetManifest {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            task: task.name.clone(),
            policy: policy.into(),
            n_episodes: episodes.len(),
            lengths: episodes.iter().map(Episode::len).collect(),
            seeds: episodes.iter().map(|e| e.seed).collect(),
            state_dim: task.state_dim,
            content_hash: Some(content_hash(&episodes)),
        };
        Dataset {
            manifest,
            task,
            episodes,
        }
    }

    pub fn content_hash(&self) -> String {
        content_hash(&self.episodes)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let body = body_lines(&self.episodes);
        let mut manifest = self.manifest.clone();
        manifest.content_hash = Some(hash_lines(body.iter().map(String::as_str)));
        writeln!(w, "{}", serde_json::to_string(&Line::Manifest(manifest)).expect("manifest serializes"))?;
        for l in &body {
            writeln!(w, "{l}")?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        self.write_to(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    /// Reads a dataset whose task is in the built-in registry.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        read(r, None)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        read(BufReader::new(File::open(path)?), None)
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }
}

fn format_err(line: usize, reason: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        line,
        reason: reason.into(),
    }
}

fn read<R: BufRead>(r: R, spec: Option<&TaskSpec>) -> Result<Dataset, DatasetError> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, first) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let first = first?;
    // Peek at the version before committing to the full manifest schema.
    let raw: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| format_err(1, format!("manifest is not JSON: {e}")))?;
    if raw.get("type").and_then(|v| v.as_str()) != Some("manifest") {
        return Err(format_err(1, "first line must be the manifest"));
    }
    if raw.get("format").and_then(|v| v.as_str()) != Some(FORMAT_NAME) {
        return Err(format_err(1, format!("format must be `{FORMAT_NAME}`")));
    }
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(DatasetError::Version { found: v as u32 }),
        None => return Err(format_err(1, "manifest has no version")),
    }
    let manifest = match serde_json::from_str::<Line>(&first) {
        Ok(Line::Manifest(m)) => m,
        Ok(_) => unreachable!("type checked above"),
        Err(e) => return Err(format_err(1, format!("bad manifest: {e}"))),
    };

    let task = match spec {
        Some(s) => s.clone(),
        None => tasks::lookup(&manifest.task)
            .cloned()
            .ok_or_else(|| format_err(1, format!("unknown task `{}`", manifest.task)))?,
    };
    if !tasks::same_name(&task.name, &manifest.task) {
        return Err(format_err(
            1,
            format!("manifest task `{}` does not match `{}`", manifest.task, task.name),
        ));
    }
    if manifest.state_dim != task.state_dim {
        return Err(format_err(
            1,
            format!(
                "manifest state_dim {} but task `{}` has {}",
                manifest.state_dim, task.name, task.state_dim
            ),
        ));
    }

    let mut hasher = Sha256::new();
    let mut episodes: Vec<Episode> = Vec::new();
    let mut open: Option<Episode> = None;
    let mut last_line = 1;
    for (no, line) in lines {
        let line = line?;
        last_line = no;
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
        let parsed: Line = serde_json::from_str(&line).map_err(|e| format_err(no, e.to_string()))?;
        match parsed {
            Line::Manifest(_) => return Err(format_err(no, "second manifest line")),
            Line::Step {
                episode,
                t,
                state,
                action,
                reward,
            } => {
                if state.len() != manifest.state_dim {
                    return Err(format_err(
                        no,
                        format!("state has {} components, manifest says {}", state.len(), manifest.state_dim),
                    ));
                }
                let ep = open.get_or_insert_with(|| Episode {
                    id: episode,
                    task: manifest.task.clone(),
                    steps: Vec::new(),
                    terminal_state: None,
                    terminated: false,
                    seed: 0,
                });
                if ep.id != episode {
                    return Err(format_err(no, format!("episode {} is not closed before {episode}", ep.id)));
                }
                if t != ep.steps.len() {
                    return Err(format_err(no, format!("expected t = {}, found {t}", ep.steps.len())));
                }
                ep.steps.push(Step { t, state, action, reward });
            }
            Line::End {
                episode,
                terminal_state,
                terminated,
                seed,
            } => {
                let mut ep = open.take().unwrap_or_else(|| Episode {
                    id: episode,
                    task: manifest.task.clone(),
                    steps: Vec::new(),
                    terminal_state: None,
                    terminated: false,
                    seed,
                });
                if ep.id != episode {
                    return Err(format_err(no, format!("end of episode {episode} while {} is open", ep.id)));
                }
                if episode != episodes.len() {
                    return Err(format_err(no, format!("episode ids must count from 0; got {episode}")));
                }
                if let Some(s) = &terminal_state {
                    if s.len() != manifest.state_dim {
                        return Err(format_err(no, "terminal_state length differs from state_dim"));
                    }
                }
                ep.terminal_state = terminal_state;
                ep.terminated = terminated;
                ep.seed = seed;
                episodes.push(ep);
            }
        }
    }
    if let Some(ep) = open {
        return Err(format_err(
            last_line + 1,
            format!("file ends inside episode {} (missing end line)", ep.id),
        ));
    }
    if episodes.len() != manifest.n_episodes {
        return Err(format_err(
            1,
            format!("manifest lists {} episodes, file has {}", manifest.n_episodes, episodes.len()),
        ));
    }
    let lengths: Vec<usize> = episodes.iter().map(Episode::len).collect();
    if lengths != manifest.lengths {
        return Err(format_err(1, "manifest lengths do not match the stored episodes"));
    }
    if let Some(expected) = &manifest.content_hash {
        let actual = hex::encode(hasher.finalize());
        if &actual != expected {
            return Err(format_err(1, format!("content hash mismatch: manifest {expected}, body {actual}")));
        }
    }
    Ok(Dataset {
        manifest,
        task,
        episodes,
    })
}

/// Loads a file recorded outside this tool and validates every episode
/// against `task`, which need not have a simulator.
pub fn ingest_external(path: &Path, task: &TaskSpec) -> Result<Dataset, DatasetError> {
    task.validate().map_err(|e| DatasetError::Precondition(e.to_string()))?;
    let ds = read(BufReader::new(File::open(path)?), Some(task))?;
    let problems: Vec<String> = ds
        .episodes
        .iter()
        .flat_map(|ep| {
            validate_episode(ep, task)
                .into_iter()
                .map(move |v| format!("episode {}: {v}", ep.id))
        })
        .collect();
    if problems.is_empty() {
        Ok(ds)
    } else {
        Err(DatasetError::Validation(problems))
    }
}

fn run_episode(
    env: BuiltinEnv,
    policy: &dyn Policy,
    episode: usize,
    seed: u64,
    max_steps: usize,
) -> Result<Episode, DatasetError> {
    let mut state = env.reset(seed, episode);
    let mut steps = Vec::new();
    let mut terminated = false;
    for t in 0..max_steps {
        let action = policy.act(&state, StepCtx { episode, t });
        let sim_err = |reason: String| DatasetError::Simulation { episode, t, reason };
        let tr = env.step(&state, &action).map_err(|e| sim_err(e.to_string()))?;
        if !tr.reward.is_finite() || tr.state.iter().any(|v| !v.is_finite()) {
            return Err(sim_err("non-finite state or reward".into()));
        }
        steps.push(Step {
            t,
            state: std::mem::replace(&mut state, tr.state),
            action,
            reward: tr.reward,
        });
        if tr.terminated {
            terminated = true;
            break;
        }
    }
    Ok(Episode {
        id: episode,
        task: env.name().into(),
        steps,
        terminal_state: Some(state),
        terminated,
        seed,
    })
}

/// Rolls out `n_episodes` episodes of a built-in task. Episodes run in
/// parallel; each depends only on `(seed, episode index)`.
pub fn collect(
    env: BuiltinEnv,
    policy: &dyn Policy,
    n_episodes: usize,
    seed: u64,
    max_steps: Option<usize>,
) -> Result<Dataset, DatasetError> {
    let task = env.spec();
    if n_episodes == 0 {
        return Err(DatasetError::Precondition("n_episodes must be at least 1".into()));
    }
    let max_steps = max_steps.unwrap_or(task.max_episode_steps);
    if max_steps == 0 || max_steps > task.max_episode_steps {
        return Err(DatasetError::Precondition(format!(
            "max_steps must be in 1..={} for {}",
            task.max_episode_steps, task.name
        )));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_episodes);
    let results: Vec<Result<Episode, DatasetError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..n_episodes)
                        .step_by(workers)
                        .map(|e| (e, run_episode(env, policy, e, seed, max_steps)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<_> = handles.into_iter().flat_map(|h| h.join().expect("collector thread")).collect();
        all.sort_by_key(|(e, _)| *e);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let episodes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::from_episodes(task, policy.name(), episodes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOptions {
    pub h: usize,
    pub stride: usize,
    /// Cap on queries returned; spread evenly over the eligible ones.
    pub limit: Option<usize>,
    /// Seeds the judge-query proposals.
    pub seed: u64,
    pub unchanged_epsilon: f64,
}

impl QueryOptions {
    pub fn new(h: usize) -> Self {
        Self {
            h,
            stride: 1,
            limit: None,
            seed: 0,
            unchanged_epsilon: DEFAULT_UNCHANGED_EPSILON,
        }
    }
}

/// Window-end indices `t` at which `kind` can be asked on an episode of
/// length `len`: the warm-up guard `t >= h` and every step the query reads
/// (`t + lookahead`) must exist.
pub fn eligible_ts(len: usize, kind: QueryKind, h: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let last = match len.checked_sub(1 + kind.lookahead()) {
        Some(l) => l,
        None => return Vec::new(),
    };
    if h == 0 || h > last {
        return Vec::new();
    }
    (h..=last).step_by(stride).collect()
}

fn propose(task: &TaskSpec, truth: &Action, seed: u64, episode: usize, t: usize) -> Action {
    let n = match task.action_space {
        ActionSpace::Discrete { n } => n,
        ActionSpace::Continuous { .. } => unreachable!("judge queries need discrete actions"),
    };
    let a = truth.as_discrete().expect("discrete truth");
    let mut r = rng::stream("judge_proposal", &[&seed, &task.name, &episode, &t]);
    if r.gen_bool(0.5) {
        Action::Discrete(a)
    } else {
        let other = r.gen_range(0..n - 1);
        Action::Discrete(if other >= a { other + 1 } else { other })
    }
}

fn build_query(ds: &Dataset, ep: &Episode, kind: QueryKind, t: usize, opts: &QueryOptions) -> Result<EvalQuery, DatasetError> {
    let i = t + 1;
    let w = window(ep, t, opts.h).map_err(|e| DatasetError::Precondition(e.to_string()))?;
    let s = |k: usize| ep.steps[k].state.clone();
    let a = |k: usize| ep.steps[k].action.clone();
    let labels = |before: Vec<f64>, after: Vec<f64>| -> Result<GroundTruth, DatasetError> {
        let labels = delta_labels(&before, &after, opts.unchanged_epsilon)
            .map_err(|e| DatasetError::Precondition(e.to_string()))?;
        Ok(GroundTruth::StateChange { labels, before, after })
    };
    let (inputs, truth) = match kind {
        QueryKind::NextAction => (
            QueryInputs::NextAction { index: i, state: s(i) },
            GroundTruth::Action { action: a(i) },
        ),
        QueryKind::LastAction => (
            QueryInputs::LastAction {
                index: i,
                state: s(i),
                next_state: s(i + 1),
            },
            GroundTruth::Action { action: a(i) },
        ),
        QueryKind::NextState => (
            QueryInputs::NextState {
                index: i,
                state: s(i),
                action: a(i),
            },
            labels(s(i), s(i + 1))?,
        ),
        QueryKind::LastState => (
            QueryInputs::LastState {
                index: i,
                action: a(i),
                next_state: s(i + 1),
            },
            labels(s(t), s(i))?,
        ),
        QueryKind::JudgeNextAction => {
            let proposal = propose(&ds.task, &a(i), opts.seed, ep.id, t);
            (
                QueryInputs::JudgeNextAction {
                    index: i,
                    state: s(i),
                    proposed_action: proposal.clone(),
                },
                GroundTruth::Judgment {
                    proposal_is_truth: proposal == a(i),
                    true_action: a(i),
                },
            )
        }
    };
    Ok(EvalQuery {
        query_id: format!("{}/e{}/t{}/h{}/{}", ds.task.name, ep.id, t, opts.h, kind),
        task: ds.task.name.clone(),
        episode_id: ep.id,
        kind,
        window: w,
        inputs,
        truth,
    })
}

/// Every eligible query of `kind` over the dataset, in (episode, t) order.
pub fn enumerate_queries(ds: &Dataset, kind: QueryKind, opts: &QueryOptions) -> Result<Vec<EvalQuery>, DatasetError> {
    kind.supported_by(&ds.task).map_err(DatasetError::Unsupported)?;
    if opts.h == 0 {
        return Err(DatasetError::Precondition("h must be at least 1".into()));
    }
    if opts.unchanged_epsilon.is_nan() || opts.unchanged_epsilon < 0.0 {
        return Err(DatasetError::Precondition("unchanged_epsilon must be non-negative".into()));
    }
    let cells: Vec<(&Episode, usize)> = ds
        .episodes
        .iter()
        .flat_map(|ep| eligible_ts(ep.len(), kind, opts.h, opts.stride).into_iter().map(move |t| (ep, t)))
        .collect();
    let picked: Vec<(&Episode, usize)> = match opts.limit {
        Some(limit) if limit < cells.len() => (0..limit).map(|k| cells[k * cells.len() / limit]).collect(),
        _ => cells,
    };
    picked.into_iter().map(|(ep, t)| build_query(ds, ep, kind, t, opts)).collect()
}

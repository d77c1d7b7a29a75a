use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::backends::BackendSpec;
use crate::dataset::{self, Dataset};
use crate::domain::{QueryKind, TaskSpec};
use crate::envs::BuiltinEnv;
use crate::metrics::GroupKey;
use crate::parsing::DEFAULT_UNCHANGED_EPSILON;
use crate::policies;
use crate::prompting::{ActionMode, PromptConfig};

pub const DEFAULT_H_VALUES: [usize; 5] = [1, 2, 4, 8, 16];

/// Where a plan's episodes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetRef {
    /// A dataset file. `task_spec` points at a TOML task description for
    /// tasks outside the registry.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task_spec: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kinds: Option<Vec<QueryKind>>,
    },
    /// Episodes simulated on the fly from a built-in task.
    Collect {
        task: String,
        episodes: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kinds: Option<Vec<QueryKind>>,
    },
}

impl DatasetRef {
    pub fn kinds(&self) -> Option<&[QueryKind]> {
        match self {
            DatasetRef::File { kinds, .. } | DatasetRef::Collect { kinds, .. } => kinds.as_deref(),
        }
    }

    fn load(&self) -> Result<Dataset, RunError> {
        Ok(match self {
            DatasetRef::File { path, task_spec: None, .. } => Dataset::load(path)?,
            DatasetRef::File {
                path,
                task_spec: Some(spec),
                ..
            } => dataset::ingest_external(path, &load_task_spec(spec)?)?,
            DatasetRef::Collect {
                task,
                episodes,
                seed,
                max_steps,
                policy,
                ..
            } => {
                let env = BuiltinEnv::for_task(task).map_err(|e| RunError::Plan(e.to_string()))?;
                let policy = policies::by_name(policy.as_deref(), env, *seed).map_err(RunError::Plan)?;
                dataset::collect(env, policy.as_ref(), *episodes, *seed, *max_steps)?
            }
        })
    }
}

pub fn load_task_spec(path: &Path) -> Result<TaskSpec, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let spec: TaskSpec = toml::from_str(&text).map_err(|e| RunError::Plan(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(|e| RunError::Plan(e.to_string()))?;
    Ok(spec)
}

fn default_kinds() -> Vec<QueryKind> {
    QueryKind::CORE.to_vec()
}

fn default_h_values() -> Vec<usize> {
    DEFAULT_H_VALUES.to_vec()
}

fn default_configs() -> Vec<PromptConfig> {
    vec![PromptConfig::default()]
}

fn default_stride() -> usize {
    1
}

fn default_epsilon() -> f64 {
    DEFAULT_UNCHANGED_EPSILON
}

fn default_output() -> PathBuf {
    PathBuf::from("run-output")
}

fn default_workers() -> usize {
    4
}

/// A sweep over datasets x backends x kinds x h x prompt configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPlan {
    pub datasets: Vec<DatasetRef>,
    pub backends: Vec<BackendSpec>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<QueryKind>,
    #[serde(default = "default_h_values")]
    pub h_values: Vec<usize>,
    /// Ablation grid. `history_size` is replaced by each value of `h_values`.
    #[serde(default = "default_configs")]
    pub prompt_configs: Vec<PromptConfig>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Cap on queries per (dataset, kind, h).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Seeds judge proposals and nothing else.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub unchanged_epsilon: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl RunPlan {
    /// The three built-in tasks at their default sizes, every applicable
    /// kind, the default h sweep and the full prompt.
    pub fn default_suite(backend: BackendSpec) -> Self {
        let collect = |task: &str, episodes: usize, max_steps: Option<usize>, kinds: &[QueryKind]| DatasetRef::Collect {
            task: task.into(),
            episodes,
            seed: 0,
            max_steps,
            policy: None,
            kinds: Some(kinds.to_vec()),
        };
        RunPlan {
            datasets: vec![
                collect("MountainCar", 5, None, &QueryKind::ALL),
                collect("Acrobot", 3, None, &QueryKind::ALL),
                collect("Pendulum", 3, Some(50), &QueryKind::CORE),
            ],
            backends: vec![backend],
            kinds: default_kinds(),
            h_values: default_h_values(),
            prompt_configs: default_configs(),
            stride: 1,
            limit: None,
            seed: 0,
            unchanged_epsilon: DEFAULT_UNCHANGED_EPSILON,
            output_dir: default_output(),
            workers: default_workers(),
        }
    }

    /// Reads a TOML plan. Relative paths inside it are taken relative to
    /// the plan file.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let mut plan: RunPlan =
            toml::from_str(&text).map_err(|e| RunError::Plan(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut plan.datasets {
            if let DatasetRef::File { path, task_spec, .. } = d {
                rebase(path);
                if let Some(s) = task_spec {
                    rebase(s);
                }
            }
        }
        for b in &mut plan.backends {
            match b {
                BackendSpec::Replay { transcript, .. } => rebase(transcript),
                BackendSpec::Remote { config } => rebase(config),
                _ => {}
            }
        }
        rebase(&mut plan.output_dir);
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plan serializes")
    }

    /// Checks everything that does not need the datasets loaded.
    pub fn validate_shape(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Plan(m.into()));
        if self.datasets.is_empty() {
            return bad("plan lists no datasets");
        }
        if self.backends.is_empty() {
            return bad("plan lists no backends");
        }
        if self.kinds.is_empty() {
            return bad("plan lists no query kinds");
        }
        if self.h_values.is_empty() || self.h_values.contains(&0) {
            return bad("h_values must be a non-empty list of positive sizes");
        }
        if self.prompt_configs.is_empty() {
            return bad("plan lists no prompt configs");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.unchanged_epsilon.is_nan() || self.unchanged_epsilon < 0.0 {
            return bad("unchanged_epsilon must be non-negative");
        }
        for c in &self.prompt_configs {
            PromptConfig {
                history_size: 1,
                ..c.clone()
            }
            .validate()
            .map_err(|e| RunError::Plan(e.to_string()))?;
        }
        Ok(())
    }

    /// Loads every dataset and checks each (kind, task) pair.
    pub fn resolve(&self) -> Result<ResolvedPlan, RunError> {
        self.validate_shape()?;
        let mut datasets = Vec::new();
        for r in &self.datasets {
            let ds = r.load()?;
            let kinds = r.kinds().map(<[_]>::to_vec).unwrap_or_else(|| self.kinds.clone());
            for k in &kinds {
                k.supported_by(&ds.task).map_err(RunError::Plan)?;
            }
            let configs = configs_for(&ds.task, &self.prompt_configs);
            datasets.push(ResolvedDataset {
                content_hash: ds.content_hash(),
                dataset: ds,
                kinds,
                configs,
            });
        }
        Ok(ResolvedPlan {
            plan: self.clone(),
            datasets,
        })
    }
}

/// Action mode has no effect on discrete tasks; collapse such duplicates.
fn configs_for(task: &TaskSpec, configs: &[PromptConfig]) -> Vec<PromptConfig> {
    let mut out: Vec<PromptConfig> = Vec::new();
    for c in configs {
        let mut c = c.clone();
        if task.action_space.is_discrete() {
            c.action_mode = ActionMode::default();
        }
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ResolvedDataset {
    pub dataset: Dataset,
    pub content_hash: String,
    pub kinds: Vec<QueryKind>,
    pub configs: Vec<PromptConfig>,
}

#[derive(Debug, Clone)]
pub struct ResolvedPlan {
    pub plan: RunPlan,
    pub datasets: Vec<ResolvedDataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDatasetManifest {
    pub task: String,
    pub policy: String,
    pub n_episodes: usize,
    pub lengths: Vec<usize>,
    pub content_hash: String,
    pub kinds: Vec<QueryKind>,
    pub ablations: Vec<String>,
}

/// What `plan.resolved.json` records: the plan plus dataset identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedManifest {
    pub plan: RunPlan,
    pub datasets: Vec<ResolvedDatasetManifest>,
    pub backends: Vec<String>,
    pub total_queries: usize,
    /// Every metric cell the plan defines, including ones with no queries.
    pub cells: Vec<GroupKey>,
}

impl ResolvedPlan {
    pub fn manifest(&self, backend_ids: Vec<String>, total_queries: usize, cells: Vec<GroupKey>) -> ResolvedManifest {
        ResolvedManifest {
            plan: self.plan.clone(),
            datasets: self
                .datasets
                .iter()
                .map(|d| ResolvedDatasetManifest {
                    task: d.dataset.task.name.clone(),
                    policy: d.dataset.manifest.policy.clone(),
                    n_episodes: d.dataset.episodes.len(),
                    lengths: d.dataset.manifest.lengths.clone(),
                    content_hash: d.content_hash.clone(),
                    kinds: d.kinds.clone(),
                    ablations: d.configs.iter().map(PromptConfig::ablation_label).collect(),
                })
                .collect(),
            backends: backend_ids,
            total_queries,
            cells,
        }
    }
}

//! Shared domain vocabulary: tasks, steps, episodes, history windows, queries
//! and scored records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::parsing::ParsedAnswer;
use crate::prompting::PromptConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DomainError {
    #[error("window out of range: t={t}, h={h}, episode length {len}")]
    OutOfRange { t: usize, h: usize, len: usize },
    #[error("invalid task spec `{task}`: {reason}")]
    InvalidTask { task: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Closed interval on one dimension. Infinite ends mark unbounded dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(with = "extended_f64")]
    pub low: f64,
    #[serde(with = "extended_f64")]
    pub high: f64,
}

impl Bounds {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub const fn unbounded() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    pub fn is_finite(&self) -> bool {
        self.low.is_finite() && self.high.is_finite()
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.low).min(self.high)
    }
}

/// JSON has no infinities; they travel as the strings "inf" / "-inf".
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected number or ±inf, got `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpaceKind {
    #[default]
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { bounds: Vec<Bounds> },
}

impl ActionSpace {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete { .. })
    }

    /// Number of action components (1 for discrete spaces).
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Discrete { .. } => 1,
            ActionSpace::Continuous { bounds } => bounds.len(),
        }
    }

    /// Why `action` does not belong to this space, if it doesn't.
    pub fn check(&self, action: &Action) -> Result<(), String> {
        match (self, action) {
            (ActionSpace::Discrete { n }, Action::Discrete(a)) => {
                if a < n {
                    Ok(())
                } else {
                    Err(format!("discrete action {a} outside [0, {n})"))
                }
            }
            (ActionSpace::Continuous { bounds }, Action::Continuous(v)) => {
                if v.len() != bounds.len() {
                    return Err(format!(
                        "action has {} components, expected {}",
                        v.len(),
                        bounds.len()
                    ));
                }
                for (i, (x, b)) in v.iter().zip(bounds).enumerate() {
                    if !x.is_finite() {
                        return Err(format!("action[{i}] is not finite"));
                    }
                    if !b.contains(*x) {
                        return Err(format!("action[{i}] = {x} outside [{}, {}]", b.low, b.high));
                    }
                }
                Ok(())
            }
            (ActionSpace::Discrete { .. }, Action::Continuous(_)) => {
                Err("continuous action under a discrete action space".into())
            }
            (ActionSpace::Continuous { .. }, Action::Discrete(_)) => {
                Err("discrete action under a continuous action space".into())
            }
        }
    }
}

/// The seven named text slots of a task's system prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlocks {
    pub task_description: String,
    pub observation_space: String,
    pub action_space: String,
    pub reward_space: String,
    pub transition_dynamics: String,
    pub init_state: String,
    pub termination: String,
}

impl TextBlocks {
    pub fn named(&self) -> [(&'static str, &str); 7] {
        [
            ("task_description", &self.task_description),
            ("observation_space", &self.observation_space),
            ("action_space", &self.action_space),
            ("reward_space", &self.reward_space),
            ("transition_dynamics", &self.transition_dynamics),
            ("init_state", &self.init_state),
            ("termination", &self.termination),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub state_dim: usize,
    pub state_bounds: Vec<Bounds>,
    #[serde(default)]
    pub state_space: StateSpaceKind,
    pub action_space: ActionSpace,
    pub max_episode_steps: usize,
    pub text: TextBlocks,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |reason: String| DomainError::InvalidTask {
            task: self.name.clone(),
            reason,
        };
        if self.state_dim == 0 {
            return Err(bad("state_dim must be at least 1".into()));
        }
        if self.state_bounds.len() != self.state_dim {
            return Err(bad(format!(
                "{} state bounds for state_dim {}",
                self.state_bounds.len(),
                self.state_dim
            )));
        }
        if self.max_episode_steps == 0 {
            return Err(bad("max_episode_steps must be positive".into()));
        }
        let check_bounds = |b: &Bounds| b.low < b.high;
        if let Some(i) = self.state_bounds.iter().position(|b| !check_bounds(b)) {
            return Err(bad(format!("state bounds {i} need low < high")));
        }
        match &self.action_space {
            ActionSpace::Discrete { n } if *n < 2 => {
                return Err(bad("discrete action spaces need at least 2 choices".into()))
            }
            ActionSpace::Continuous { bounds } => {
                if bounds.is_empty() {
                    return Err(bad("continuous action space needs at least one dimension".into()));
                }
                if let Some(i) = bounds.iter().position(|b| !check_bounds(b) || !b.is_finite()) {
                    return Err(bad(format!("action bounds {i} need finite low < high")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Continuous(v) => Some(v),
            Action::Discrete(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: usize,
    pub task: String,
    pub steps: Vec<Step>,
    /// State reached after the final action.
    pub terminal_state: Option<Vec<f64>>,
    pub terminated: bool,
    pub seed: u64,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(t) => write!(f, "step {t}: {}", self.rule),
            None => write!(f, "episode: {}", self.rule),
        }
    }
}

/// Checks every Step/Episode invariant. An empty result means the episode is
/// well-formed for `task`.
pub fn validate_episode(episode: &Episode, task: &TaskSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut at = |step: Option<usize>, rule: String| out.push(Violation { step, rule });

    if episode.steps.len() > task.max_episode_steps {
        at(
            None,
            format!(
                "length {} exceeds max_episode_steps {}",
                episode.steps.len(),
                task.max_episode_steps
            ),
        );
    }
    for (i, step) in episode.steps.iter().enumerate() {
        if step.t != i {
            at(Some(i), format!("index {} is not contiguous (expected {i})", step.t));
        }
        if step.state.len() != task.state_dim {
            at(
                Some(i),
                format!("state has length {}, expected {}", step.state.len(), task.state_dim),
            );
        } else {
            for (d, (x, b)) in step.state.iter().zip(&task.state_bounds).enumerate() {
                if !x.is_finite() {
                    at(Some(i), format!("state[{d}] is not finite"));
                } else if !b.contains(*x) {
                    at(Some(i), format!("state[{d}] = {x} outside [{}, {}]", b.low, b.high));
                }
            }
        }
        if let Err(e) = task.action_space.check(&step.action) {
            at(Some(i), e);
        }
        if !step.reward.is_finite() {
            at(Some(i), "reward is not finite".into());
        }
    }
    match (&episode.terminal_state, episode.steps.is_empty()) {
        (Some(_), true) => at(None, "terminal_state present on an empty episode".into()),
        (None, false) => at(None, "terminal_state missing".into()),
        (Some(s), false) if s.len() != task.state_dim => at(
            None,
            format!("terminal_state has length {}, expected {}", s.len(), task.state_dim),
        ),
        _ => {}
    }
    out
}

/// The `h` most recent steps of one episode, ending at index `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryWindow {
    pub episode_id: usize,
    pub t: usize,
    pub h: usize,
    pub steps: Vec<Step>,
}

impl HistoryWindow {
    pub fn first_index(&self) -> usize {
        self.t + 1 - self.h
    }
}

/// Extracts the window of `h` steps ending at `t`.
///
/// Requires `h >= 1`, `t >= h` (the warm-up guard) and `t < len`.
pub fn window(episode: &Episode, t: usize, h: usize) -> Result<HistoryWindow, DomainError> {
    let len = episode.steps.len();
    if h == 0 || t < h || t >= len {
        return Err(DomainError::OutOfRange { t, h, len });
    }
    Ok(HistoryWindow {
        episode_id: episode.id,
        t,
        h,
        steps: episode.steps[t + 1 - h..=t].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    NextAction,
    LastAction,
    NextState,
    LastState,
    JudgeNextAction,
}

impl QueryKind {
    pub const CORE: [QueryKind; 4] = [
        QueryKind::NextAction,
        QueryKind::LastAction,
        QueryKind::NextState,
        QueryKind::LastState,
    ];

    pub const ALL: [QueryKind; 5] = [
        QueryKind::NextAction,
        QueryKind::LastAction,
        QueryKind::NextState,
        QueryKind::LastState,
        QueryKind::JudgeNextAction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QueryKind::NextAction => "next_action",
            QueryKind::LastAction => "last_action",
            QueryKind::NextState => "next_state",
            QueryKind::LastState => "last_state",
            QueryKind::JudgeNextAction => "judge_next_action",
        }
    }

    pub fn predicts_action(&self) -> bool {
        matches!(self, QueryKind::NextAction | QueryKind::LastAction)
    }

    pub fn predicts_state(&self) -> bool {
        matches!(self, QueryKind::NextState | QueryKind::LastState)
    }

    /// How many steps past the window end the query reads from the episode.
    pub fn lookahead(&self) -> usize {
        match self {
            QueryKind::NextAction | QueryKind::JudgeNextAction => 1,
            QueryKind::LastAction | QueryKind::NextState | QueryKind::LastState => 2,
        }
    }

    /// Whether this kind can be asked about `task` at all.
    pub fn supported_by(&self, task: &TaskSpec) -> Result<(), String> {
        if task.state_space == StateSpaceKind::Discrete && !task.action_space.is_discrete() {
            return Err(format!(
                "task `{}` combines a discrete state space with continuous actions",
                task.name
            ));
        }
        if *self == QueryKind::JudgeNextAction && !task.action_space.is_discrete() {
            return Err(format!(
                "judge_next_action needs a discrete action space; `{}` is continuous",
                task.name
            ));
        }
        Ok(())
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| format!("unknown query kind `{s}`"))
    }
}

/// Per-dimension relative change of a state element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaLabel {
    Decrease,
    Increase,
    #[serde(rename = "unchange")]
    Unchanged,
}

impl DeltaLabel {
    /// Numeric class code: increase 1, decrease 0, unchanged 2.
    pub fn code(&self) -> u8 {
        match self {
            DeltaLabel::Decrease => 0,
            DeltaLabel::Increase => 1,
            DeltaLabel::Unchanged => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DeltaLabel::Decrease),
            1 => Some(DeltaLabel::Increase),
            2 => Some(DeltaLabel::Unchanged),
            _ => None,
        }
    }

    pub fn word(&self) -> &'static str {
        match self {
            DeltaLabel::Decrease => "decrease",
            DeltaLabel::Increase => "increase",
            DeltaLabel::Unchanged => "unchange",
        }
    }
}

/// What the model is shown about the masked-out step. `index` is the absolute
/// episode index of the queried step (`t + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryInputs {
    NextAction {
        index: usize,
        state: Vec<f64>,
    },
    LastAction {
        index: usize,
        state: Vec<f64>,
        next_state: Vec<f64>,
    },
    NextState {
        index: usize,
        state: Vec<f64>,
        action: Action,
    },
    LastState {
        index: usize,
        action: Action,
        next_state: Vec<f64>,
    },
    JudgeNextAction {
        index: usize,
        state: Vec<f64>,
        proposed_action: Action,
    },
}

impl QueryInputs {
    pub fn index(&self) -> usize {
        match self {
            QueryInputs::NextAction { index, .. }
            | QueryInputs::LastAction { index, .. }
            | QueryInputs::NextState { index, .. }
            | QueryInputs::LastState { index, .. }
            | QueryInputs::JudgeNextAction { index, .. } => *index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroundTruth {
    Action {
        action: Action,
    },
    /// Change labels from `before` to `after`, one per state element.
    StateChange {
        labels: Vec<DeltaLabel>,
        before: Vec<f64>,
        after: Vec<f64>,
    },
    Judgment {
        proposal_is_truth: bool,
        true_action: Action,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub task: String,
    pub episode_id: usize,
    pub kind: QueryKind,
    pub window: HistoryWindow,
    pub inputs: QueryInputs,
    pub truth: GroundTruth,
}

/// Manual-review error categories, numbered 1 through 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ErrorType {
    TaskUnderstanding = 1,
    Logic = 2,
    HistoryUnderstanding = 3,
    PhysicalUnderstanding = 4,
    MathematicalUnderstanding = 5,
    MissingInformation = 6,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::TaskUnderstanding,
        ErrorType::Logic,
        ErrorType::HistoryUnderstanding,
        ErrorType::PhysicalUnderstanding,
        ErrorType::MathematicalUnderstanding,
        ErrorType::MissingInformation,
    ];

    pub fn number(&self) -> u8 {
        *self as u8
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorType::TaskUnderstanding => "Task Understanding",
            ErrorType::Logic => "Logic",
            ErrorType::HistoryUnderstanding => "History Understanding",
            ErrorType::PhysicalUnderstanding => "Physical Understanding",
            ErrorType::MathematicalUnderstanding => "Mathematical Understanding",
            ErrorType::MissingInformation => "Missing Information",
        }
    }
}

impl TryFrom<u8> for ErrorType {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        ErrorType::ALL
            .into_iter()
            .find(|e| e.number() == v)
            .ok_or_else(|| format!("error type must be 1..=6, got {v}"))
    }
}

impl From<ErrorType> for u8 {
    fn from(e: ErrorType) -> u8 {
        e.number()
    }
}

/// One scored model interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query: EvalQuery,
    pub model: String,
    pub config: PromptConfig,
    pub prompt_fingerprint: String,
    pub config_fingerprint: String,
    pub raw_response: String,
    pub parsed: ParsedAnswer,
    pub auto_correct: bool,
    /// Per-dimension correctness for state queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_correct: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_tags: Vec<ErrorType>,
    pub latency_ms: u64,
}

impl EvalRecord {
    /// Journal identity: one record per (model, query, prompt config).
    pub fn key(&self) -> String {
        record_key(&self.model, &self.query.query_id, &self.config_fingerprint)
    }
}

pub fn record_key(model: &str, query_id: &str, config_fingerprint: &str) -> String {
    format!("{model}|{query_id}|{config_fingerprint}")
}

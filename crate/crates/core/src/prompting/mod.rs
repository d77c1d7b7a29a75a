//! Prompt rendering: the system prompt describing the task, the history
//! block, and the per-kind question with its answer scaffold.
//!
//! Template texts live in `assets/prompts` and are compiled in. Rendering is a
//! pure function of `(query, task, config)`.

mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Action, ActionSpace, EvalQuery, HistoryWindow, QueryInputs, QueryKind, TaskSpec};
use crate::parsing::bin_edge;
use templates::{fill, TEMPLATES};

/// Bumped whenever an asset under `assets/prompts` changes wording.
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("template error: {0}")]
    Template(String),
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("invalid prompt config: {0}")]
    InvalidConfig(String),
}

/// How continuous actions are asked for and answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActionMode {
    Bins { n: usize },
    Absolute,
}

impl Default for ActionMode {
    fn default() -> Self {
        ActionMode::Bins { n: 10 }
    }
}

impl fmt::Display for ActionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionMode::Bins { n } => write!(f, "bins{n}"),
            ActionMode::Absolute => f.write_str("absolute"),
        }
    }
}

impl FromStr for ActionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "absolute" {
            return Ok(ActionMode::Absolute);
        }
        let digits = s
            .strip_prefix("bins")
            .ok_or_else(|| format!("action mode must be `absolute` or `bins<N>`, got `{s}`"))?
            .trim_start_matches(['(', '=', ':'])
            .trim_end_matches(')');
        let n = if digits.is_empty() {
            10
        } else {
            digits.parse().map_err(|_| format!("bad bin count in `{s}`"))?
        };
        if n < 2 {
            return Err(format!("bins need n >= 2, got {n}"));
        }
        Ok(ActionMode::Bins { n })
    }
}

impl TryFrom<String> for ActionMode {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ActionMode> for String {
    fn from(m: ActionMode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateQueryMode {
    #[default]
    RelativeChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub indexed_history: bool,
    pub include_task_description: bool,
    pub include_dynamics: bool,
    pub action_mode: ActionMode,
    pub state_query_mode: StateQueryMode,
    pub history_size: usize,
    /// Digits after the decimal point in scientific notation.
    pub mantissa_digits: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            indexed_history: true,
            include_task_description: true,
            include_dynamics: true,
            action_mode: ActionMode::default(),
            state_query_mode: StateQueryMode::RelativeChange,
            history_size: 4,
            mantissa_digits: 4,
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if let ActionMode::Bins { n } = self.action_mode {
            if n < 2 {
                return Err(PromptError::InvalidConfig(format!("bins need n >= 2, got {n}")));
            }
        }
        if self.history_size == 0 {
            return Err(PromptError::InvalidConfig("history_size must be at least 1".into()));
        }
        if self.mantissa_digits > 16 {
            return Err(PromptError::InvalidConfig("mantissa_digits must be at most 16".into()));
        }
        Ok(())
    }

    /// Short name of the ablation cell, e.g. `idx-inst-dyn-bins10`.
    pub fn ablation_label(&self) -> String {
        let flag = |on: bool, name: &str| if on { name.to_string() } else { format!("no{name}") };
        format!(
            "{}-{}-{}-{}",
            flag(self.indexed_history, "idx"),
            flag(self.include_task_description, "inst"),
            flag(self.include_dynamics, "dyn"),
            self.action_mode
        )
    }

    /// Stable hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub query_id: String,
    pub system_text: String,
    pub user_text: String,
    pub config: PromptConfig,
    pub fingerprint: String,
}

pub fn prompt_fingerprint(system: &str, user: &str, config: &PromptConfig) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update([0u8]);
    h.update(user.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_string(config).expect("config serializes").as_bytes());
    hex::encode(h.finalize())
}

/// Scientific notation with a signed two-digit exponent: `-4.0838e-01`.
pub fn format_number(x: f64, mantissa_digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.mantissa_digits$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub fn format_vector(xs: &[f64], mantissa_digits: usize) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format_number(*x, mantissa_digits)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn format_action(a: &Action, mantissa_digits: usize) -> String {
    match a {
        Action::Discrete(i) => i.to_string(),
        Action::Continuous(v) => format_vector(v, mantissa_digits),
    }
}

/// The system prompt as `(slot, text)` sections, ablated sections removed.
/// The first section is the header line.
pub fn system_sections(task: &TaskSpec, config: &PromptConfig) -> Result<Vec<(&'static str, String)>, PromptError> {
    let tpl = &*TEMPLATES;
    let mut out = vec![("header", fill(&tpl.system.header, &[("task_name", &task.name)])?)];
    for (slot, text) in task.text.named() {
        if (slot == "task_description" && !config.include_task_description)
            || (slot == "transition_dynamics" && !config.include_dynamics)
        {
            continue;
        }
        let label = tpl
            .system
            .label(slot)
            .ok_or_else(|| PromptError::Template(format!("no label for section `{slot}`")))?;
        let body = text.trim_end();
        if body.trim().is_empty() {
            return Err(PromptError::Template(format!(
                "task `{}` is missing its `{slot}` text",
                task.name
            )));
        }
        out.push((slot, format!("{label}:\n{body}")));
    }
    Ok(out)
}

pub fn render_system(task: &TaskSpec, config: &PromptConfig) -> Result<String, PromptError> {
    let sections = system_sections(task, config)?;
    Ok(sections.into_iter().map(|(_, s)| s).collect::<Vec<_>>().join("\n\n"))
}

pub fn render_history(window: &HistoryWindow, config: &PromptConfig) -> String {
    let d = config.mantissa_digits;
    let lines = |prefix: &str, value: &dyn Fn(usize) -> String| -> String {
        window
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if config.indexed_history {
                    format!("{prefix}{} = {}", s.t, value(k))
                } else {
                    value(k)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let states = lines("s", &|k| format_vector(&window.steps[k].state, d));
    let actions = lines("a", &|k| format_action(&window.steps[k].action, d));
    let rewards = lines("r", &|k| format_number(window.steps[k].reward, d));
    fill(
        &TEMPLATES.history,
        &[("states", &states), ("actions", &actions), ("rewards", &rewards)],
    )
    .expect("history template placeholders are fixed")
}

fn action_detail(space: &ActionSpace, mode: ActionMode, d: usize) -> Option<String> {
    let ActionSpace::Continuous { bounds } = space else {
        return None;
    };
    let mut blocks = Vec::new();
    for (k, b) in bounds.iter().enumerate() {
        let subject = if bounds.len() == 1 {
            "The action range".to_string()
        } else {
            format!("Action dimension {k}")
        };
        blocks.push(match mode {
            ActionMode::Bins { n } => {
                let mut s = format!("{subject} is divided into {n} bins, indexed from 0:");
                for i in 0..n {
                    let close = if i + 1 == n { ']' } else { ')' };
                    s.push_str(&format!(
                        "\nbin {i}: [{}, {}{close}",
                        format_number(bin_edge(b, n, i), d),
                        format_number(bin_edge(b, n, i + 1), d)
                    ));
                }
                s
            }
            ActionMode::Absolute => format!(
                "{subject} is [{}, {}].",
                format_number(b.low, d),
                format_number(b.high, d)
            ),
        });
    }
    Some(blocks.join("\n\n"))
}

fn scaffold(kind: QueryKind, task: &TaskSpec, mode: ActionMode) -> Result<String, PromptError> {
    let tpl = &TEMPLATES.questions.scaffold;
    let list = |item: &dyn Fn(usize) -> String, n: usize| {
        (0..n).map(item).collect::<Vec<_>>().join(", ")
    };
    let (part, stub) = match kind {
        QueryKind::NextAction | QueryKind::LastAction => match (&task.action_space, mode) {
            (ActionSpace::Discrete { .. }, _) => (&tpl.discrete, "action_choice = [0]".to_string()),
            (ActionSpace::Continuous { bounds }, ActionMode::Bins { .. }) => (
                &tpl.bins,
                format!("action_choice = [{}]", list(&|_| "0".into(), bounds.len())),
            ),
            (ActionSpace::Continuous { bounds }, ActionMode::Absolute) => (
                &tpl.absolute,
                format!("action_choice = [{}]", list(&|_| "0.0".into(), bounds.len())),
            ),
        },
        QueryKind::NextState | QueryKind::LastState => {
            let words = ["increase", "decrease", "unchange"];
            (
                &tpl.state,
                format!("state_change = [{}]", list(&|i| words[i % 3].into(), task.state_dim)),
            )
        }
        QueryKind::JudgeNextAction => (&tpl.judgment, "judgment = [agree]".to_string()),
    };
    fill(
        &tpl.intro,
        &[
            ("subject", &part.subject),
            ("comment", &part.comment),
            ("stub", &stub),
            ("closing", &part.closing),
        ],
    )
}

pub fn render_question(query: &EvalQuery, task: &TaskSpec, config: &PromptConfig) -> Result<String, PromptError> {
    query.kind.supported_by(task).map_err(PromptError::UnsupportedQuery)?;
    let expected = query.kind;
    let actual = match &query.inputs {
        QueryInputs::NextAction { .. } => QueryKind::NextAction,
        QueryInputs::LastAction { .. } => QueryKind::LastAction,
        QueryInputs::NextState { .. } => QueryKind::NextState,
        QueryInputs::LastState { .. } => QueryKind::LastState,
        QueryInputs::JudgeNextAction { .. } => QueryKind::JudgeNextAction,
    };
    if expected != actual {
        return Err(PromptError::UnsupportedQuery(format!(
            "query `{}` is {expected} but carries {actual} inputs",
            query.query_id
        )));
    }

    let d = config.mantissa_digits;
    let tpl = &TEMPLATES.questions;
    let i = query.inputs.index();
    let hint = match (&task.action_space, config.action_mode) {
        (ActionSpace::Discrete { .. }, _) => &tpl.hints.discrete,
        (_, ActionMode::Bins { .. }) => &tpl.hints.bins,
        (_, ActionMode::Absolute) => &tpl.hints.absolute,
    };
    let (i_s, j_s, p_s, dim_s) = (
        i.to_string(),
        (i + 1).to_string(),
        i.saturating_sub(1).to_string(),
        task.state_dim.to_string(),
    );
    let mut values: Vec<(&str, String)> = vec![
        ("i", i_s),
        ("j", j_s),
        ("p", p_s),
        ("dim", dim_s),
        ("action_hint", hint.clone()),
    ];
    match &query.inputs {
        QueryInputs::NextAction { state, .. } => values.push(("state", format_vector(state, d))),
        QueryInputs::LastAction { state, next_state, .. } => {
            values.push(("state", format_vector(state, d)));
            values.push(("next_state", format_vector(next_state, d)));
        }
        QueryInputs::NextState { state, action, .. } => {
            values.push(("state", format_vector(state, d)));
            values.push(("action", format_action(action, d)));
        }
        QueryInputs::LastState { action, next_state, .. } => {
            values.push(("action", format_action(action, d)));
            values.push(("next_state", format_vector(next_state, d)));
        }
        QueryInputs::JudgeNextAction {
            state, proposed_action, ..
        } => {
            values.push(("state", format_vector(state, d)));
            values.push(("proposal", format_action(proposed_action, d)));
        }
    }
    let pair = tpl.for_kind(query.kind);
    let body_tpl = if config.indexed_history { &pair.indexed } else { &pair.plain };
    let refs: Vec<(&str, &str)> = values.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let mut out = fill(body_tpl, &refs)?;
    if query.kind.predicts_action() {
        if let Some(detail) = action_detail(&task.action_space, config.action_mode, d) {
            out.push_str("\n\n");
            out.push_str(&detail);
        }
    }
    out.push_str("\n\n");
    out.push_str(&scaffold(query.kind, task, config.action_mode)?);
    Ok(out)
}

pub fn render(query: &EvalQuery, task: &TaskSpec, config: &PromptConfig) -> Result<RenderedPrompt, PromptError> {
    config.validate()?;
    let system_text = render_system(task, config)?;
    let history = render_history(&query.window, config);
    let question = render_question(query, task, config)?;
    let user_text = fill(&TEMPLATES.evaluation, &[("history", &history), ("question", &question)])?;
    let fingerprint = prompt_fingerprint(&system_text, &user_text, config);
    Ok(RenderedPrompt {
        query_id: query.query_id.clone(),
        system_text,
        user_text,
        config: config.clone(),
        fingerprint,
    })
}

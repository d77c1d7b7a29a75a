use std::collections::HashMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::Deserialize;

use super::PromptError;
use crate::domain::QueryKind;

#[derive(Debug, Deserialize)]
pub(super) struct SystemSkeleton {
    pub header: String,
    labels: Vec<[String; 2]>,
}

impl SystemSkeleton {
    pub fn label(&self, slot: &str) -> Option<&str> {
        self.labels.iter().find(|[s, _]| s == slot).map(|[_, l]| l.as_str())
    }
}

#[derive(Debug, Deserialize)]
pub(super) struct QuestionPair {
    pub indexed: String,
    pub plain: String,
}

#[derive(Debug, Deserialize)]
pub(super) struct Hints {
    pub discrete: String,
    pub bins: String,
    pub absolute: String,
}

#[derive(Debug, Deserialize)]
pub(super) struct ScaffoldPart {
    pub subject: String,
    pub comment: String,
    pub closing: String,
}

#[derive(Debug, Deserialize)]
pub(super) struct Scaffold {
    pub intro: String,
    pub discrete: ScaffoldPart,
    pub bins: ScaffoldPart,
    pub absolute: ScaffoldPart,
    pub state: ScaffoldPart,
    pub judgment: ScaffoldPart,
}

#[derive(Debug, Deserialize)]
pub(super) struct Questions {
    next_action: QuestionPair,
    last_action: QuestionPair,
    next_state: QuestionPair,
    last_state: QuestionPair,
    judge_next_action: QuestionPair,
    pub hints: Hints,
    pub scaffold: Scaffold,
}

impl Questions {
    pub fn for_kind(&self, kind: QueryKind) -> &QuestionPair {
        match kind {
            QueryKind::NextAction => &self.next_action,
            QueryKind::LastAction => &self.last_action,
            QueryKind::NextState => &self.next_state,
            QueryKind::LastState => &self.last_state,
            QueryKind::JudgeNextAction => &self.judge_next_action,
        }
    }
}

pub(super) struct Templates {
    pub system: SystemSkeleton,
    pub history: String,
    pub evaluation: String,
    pub questions: Questions,
}

pub(super) static TEMPLATES: LazyLock<Templates> = LazyLock::new(|| Templates {
    system: toml::from_str(include_str!("../../assets/prompts/system.toml")).expect("system.toml"),
    history: include_str!("../../assets/prompts/history.txt").trim_end().to_string(),
    evaluation: include_str!("../../assets/prompts/evaluation.txt").trim_end().to_string(),
    questions: toml::from_str(include_str!("../../assets/prompts/questions.toml")).expect("questions.toml"),
});

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").unwrap());

/// Substitutes `{name}` placeholders. Every placeholder must have a value.
pub(super) fn fill(template: &str, values: &[(&str, &str)]) -> Result<String, PromptError> {
    let map: HashMap<&str, &str> = values.iter().copied().collect();
    let mut missing = None;
    let out = PLACEHOLDER.replace_all(template, |c: &Captures| match map.get(&c[1]) {
        Some(v) => v.to_string(),
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(PromptError::Template(format!("no value for placeholder `{{{name}}}`"))),
        None => Ok(out.into_owned()),
    }
}

//! Extraction of structured answers from raw model text, and the
//! quantization rules shared with scoring and prompt rendering.
//!
//! Every extractor is total: malformed text yields `ParsedAnswer::ParseFailure`
//! rather than an error, and the last answer stub in the text wins.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{ActionSpace, Bounds, DeltaLabel, DomainError, QueryKind, TaskSpec};
use crate::prompting::ActionMode;

/// Default tolerance below which a state element counts as unchanged.
pub const DEFAULT_UNCHANGED_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Agree,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ParsedAnswer {
    DiscreteAction(usize),
    /// One bin index per action dimension.
    BinIndex(Vec<usize>),
    AbsoluteAction(Vec<f64>),
    StateDeltaLabels(Vec<DeltaLabel>),
    Judgment(Judgment),
    ParseFailure(String),
}

impl ParsedAnswer {
    pub fn is_failure(&self) -> bool {
        matches!(self, ParsedAnswer::ParseFailure(_))
    }

    fn fail(reason: impl Into<String>) -> Self {
        ParsedAnswer::ParseFailure(reason.into())
    }
}

static ACTION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"action_choice\s*=\s*(?:\[([^\]]*)\]|([-+]?\d[\d.]*(?:[eE][-+]?\d+)?))").unwrap()
});
static STATE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"state_change\s*=\s*\[([^\]]*)\]").unwrap());
static JUDGMENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"judgment\s*=\s*\[([^\]]*)\]").unwrap());

fn last_list<'t>(re: &Regex, text: &'t str) -> Option<&'t str> {
    re.captures_iter(text)
        .last()
        .and_then(|c| c.get(1).or_else(|| c.get(2)))
        .map(|m| m.as_str())
}

fn items(list: &str) -> Vec<String> {
    list.split(',')
        .map(|s| {
            s.trim()
                .trim_matches(|c| c == '"' || c == '\'' || c == '`')
                .trim()
                .replace('\u{2212}', "-")
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_index(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    let f = s.parse::<f64>().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 1e15).then_some(f as i64)
}

/// Finds the last `action_choice = [...]` stub and reads it according to the
/// action space and continuous-action mode.
pub fn extract_action(text: &str, task: &TaskSpec, mode: ActionMode) -> ParsedAnswer {
    let Some(list) = last_list(&ACTION_RE, text) else {
        return ParsedAnswer::fail("no pattern");
    };
    let values = items(list);
    match &task.action_space {
        ActionSpace::Discrete { n } => {
            let Some(first) = values.first() else {
                return ParsedAnswer::fail("empty list");
            };
            match parse_index(first) {
                Some(a) if a >= 0 && (a as usize) < *n => ParsedAnswer::DiscreteAction(a as usize),
                Some(_) => ParsedAnswer::fail("out of range"),
                None => ParsedAnswer::fail("not an integer"),
            }
        }
        ActionSpace::Continuous { bounds } => {
            if values.len() < bounds.len() {
                return ParsedAnswer::fail("count");
            }
            match mode {
                ActionMode::Bins { n } => {
                    let mut out = Vec::with_capacity(bounds.len());
                    for v in &values[..bounds.len()] {
                        match parse_index(v) {
                            Some(b) if b >= 0 && (b as usize) < n => out.push(b as usize),
                            Some(_) => return ParsedAnswer::fail("out of range"),
                            None => return ParsedAnswer::fail("not an integer"),
                        }
                    }
                    ParsedAnswer::BinIndex(out)
                }
                ActionMode::Absolute => {
                    let mut out = Vec::with_capacity(bounds.len());
                    for v in &values[..bounds.len()] {
                        match v.parse::<f64>() {
                            Ok(x) if x.is_finite() => out.push(x),
                            _ => return ParsedAnswer::fail("not a number"),
                        }
                    }
                    ParsedAnswer::AbsoluteAction(out)
                }
            }
        }
    }
}

fn label_of(word: &str) -> Option<DeltaLabel> {
    match word.to_ascii_lowercase().as_str() {
        "increase" => Some(DeltaLabel::Increase),
        "decrease" => Some(DeltaLabel::Decrease),
        "unchange" | "unchanged" => Some(DeltaLabel::Unchanged),
        _ => None,
    }
}

/// Reads the last `state_change = [...]` stub as one label per state element.
pub fn extract_state_labels(text: &str, state_dim: usize) -> ParsedAnswer {
    let Some(list) = last_list(&STATE_RE, text) else {
        return ParsedAnswer::fail("no pattern");
    };
    let words = items(list);
    if words.len() != state_dim {
        return ParsedAnswer::fail("count");
    }
    match words.iter().map(|w| label_of(w)).collect::<Option<Vec<_>>>() {
        Some(labels) => ParsedAnswer::StateDeltaLabels(labels),
        None => ParsedAnswer::fail("vocabulary"),
    }
}

pub fn extract_judgment(text: &str) -> ParsedAnswer {
    let Some(list) = last_list(&JUDGMENT_RE, text) else {
        return ParsedAnswer::fail("no pattern");
    };
    let words = items(list);
    match words.first().map(|w| w.to_ascii_lowercase()).as_deref() {
        Some("agree") => ParsedAnswer::Judgment(Judgment::Agree),
        Some("disagree") => ParsedAnswer::Judgment(Judgment::Disagree),
        Some(_) => ParsedAnswer::fail("vocabulary"),
        None => ParsedAnswer::fail("empty list"),
    }
}

/// Dispatches to the extractor for `kind`.
pub fn parse_response(text: &str, kind: QueryKind, task: &TaskSpec, mode: ActionMode) -> ParsedAnswer {
    match kind {
        QueryKind::NextAction | QueryKind::LastAction => extract_action(text, task, mode),
        QueryKind::NextState | QueryKind::LastState => extract_state_labels(text, task.state_dim),
        QueryKind::JudgeNextAction => extract_judgment(text),
    }
}

/// Lower edge of bin `i`, or the upper bound when `i == n_bins`.
pub fn bin_edge(bounds: &Bounds, n_bins: usize, i: usize) -> f64 {
    if i >= n_bins {
        bounds.high
    } else {
        bounds.low + i as f64 * ((bounds.high - bounds.low) / n_bins as f64)
    }
}

/// Maps a value to one of `n_bins` equal-width bins over `bounds`.
///
/// Bins are half-open `[edge_i, edge_{i+1})` except the last, which is
/// closed. Values outside the box are clamped first.
pub fn quantize(value: f64, bounds: &Bounds, n_bins: usize) -> Result<usize, DomainError> {
    if !bounds.is_finite() || bounds.low >= bounds.high {
        return Err(DomainError::Invalid(format!(
            "cannot quantize over degenerate box [{}, {}]",
            bounds.low, bounds.high
        )));
    }
    if n_bins == 0 {
        return Err(DomainError::Invalid("n_bins must be positive".into()));
    }
    if value.is_nan() {
        return Err(DomainError::Invalid("cannot quantize NaN".into()));
    }
    let v = bounds.clamp(value);
    let width = (bounds.high - bounds.low) / n_bins as f64;
    let mut i = (((v - bounds.low) / width).floor().max(0.0) as usize).min(n_bins - 1);
    // Settle rounding at the edges so bins agree with `bin_edge`.
    while i + 1 < n_bins && v >= bin_edge(bounds, n_bins, i + 1) {
        i += 1;
    }
    while i > 0 && v < bin_edge(bounds, n_bins, i) {
        i -= 1;
    }
    Ok(i)
}

/// Per-element relative change from `prev` to `next`.
pub fn delta_labels(prev: &[f64], next: &[f64], epsilon: f64) -> Result<Vec<DeltaLabel>, DomainError> {
    if prev.len() != next.len() {
        return Err(DomainError::Invalid(format!(
            "state lengths differ: {} vs {}",
            prev.len(),
            next.len()
        )));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(DomainError::Invalid("epsilon must be non-negative".into()));
    }
    Ok(prev
        .iter()
        .zip(next)
        .map(|(a, b)| {
            let d = b - a;
            if d > epsilon {
                DeltaLabel::Increase
            } else if d < -epsilon {
                DeltaLabel::Decrease
            } else {
                DeltaLabel::Unchanged
            }
        })
        .collect())
}

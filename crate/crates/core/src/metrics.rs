//! Scoring of parsed answers and aggregation into accuracy tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Action, ActionSpace, ErrorType, EvalQuery, EvalRecord, GroundTruth, QueryKind, TaskSpec};
use crate::parsing::{quantize, Judgment, ParsedAnswer};
use crate::prompting::ActionMode;

/// Bins used to compare absolute continuous predictions with the truth.
pub const ABSOLUTE_SCORING_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub correct: bool,
    /// One indicator per state element, for state kinds only.
    pub element_correct: Option<Vec<bool>>,
}

fn same_bins(pred: &[f64], truth: &[f64], space: &ActionSpace, n: usize) -> bool {
    let ActionSpace::Continuous { bounds } = space else {
        return false;
    };
    pred.len() == bounds.len()
        && truth.len() == bounds.len()
        && bounds
            .iter()
            .zip(pred.iter().zip(truth))
            .all(|(b, (p, t))| match (quantize(*p, b, n), quantize(*t, b, n)) {
                (Ok(x), Ok(y)) => x == y,
                _ => false,
            })
}

fn bins_match(pred: &[usize], truth: &[f64], space: &ActionSpace, n: usize) -> bool {
    let ActionSpace::Continuous { bounds } = space else {
        return false;
    };
    pred.len() == bounds.len()
        && truth.len() == bounds.len()
        && bounds
            .iter()
            .zip(pred.iter().zip(truth))
            .all(|(b, (p, t))| quantize(*t, b, n).is_ok_and(|bin| bin == *p))
}

/// Scores one parsed answer against the query's ground truth.
pub fn score_answer(query: &EvalQuery, parsed: &ParsedAnswer, task: &TaskSpec, mode: ActionMode) -> Score {
    let plain = |correct: bool| Score {
        correct,
        element_correct: None,
    };
    match (&query.truth, parsed) {
        (GroundTruth::StateChange { labels, .. }, parsed) => {
            let elements: Vec<bool> = match parsed {
                ParsedAnswer::StateDeltaLabels(p) if p.len() == labels.len() => {
                    p.iter().zip(labels).map(|(a, b)| a == b).collect()
                }
                _ => vec![false; labels.len()],
            };
            Score {
                correct: !elements.is_empty() && elements.iter().all(|c| *c),
                element_correct: Some(elements),
            }
        }
        (GroundTruth::Action { action: Action::Discrete(a) }, ParsedAnswer::DiscreteAction(p)) => plain(a == p),
        (GroundTruth::Action { action: Action::Continuous(v) }, ParsedAnswer::BinIndex(bins)) => match mode {
            ActionMode::Bins { n } => plain(bins_match(bins, v, &task.action_space, n)),
            ActionMode::Absolute => plain(false),
        },
        (GroundTruth::Action { action: Action::Continuous(v) }, ParsedAnswer::AbsoluteAction(p)) => {
            let n = match mode {
                ActionMode::Bins { n } => n,
                ActionMode::Absolute => ABSOLUTE_SCORING_BINS,
            };
            plain(same_bins(p, v, &task.action_space, n))
        }
        (GroundTruth::Judgment { proposal_is_truth, .. }, ParsedAnswer::Judgment(j)) => {
            plain((*j == Judgment::Agree) == *proposal_is_truth)
        }
        _ => plain(false),
    }
}

/// Re-scores a stored record.
pub fn score(record: &EvalRecord, task: &TaskSpec) -> Score {
    score_answer(&record.query, &record.parsed, task, record.config.action_mode)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub task: String,
    pub model: String,
    pub kind: QueryKind,
    pub h: usize,
    pub ablation: String,
}

impl GroupKey {
    pub fn of(record: &EvalRecord) -> Self {
        GroupKey {
            task: record.query.task.clone(),
            model: record.model.clone(),
            kind: record.query.kind,
            h: record.config.history_size,
            ablation: record.config.ablation_label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub task: String,
    pub model: String,
    pub kind: QueryKind,
    pub h: usize,
    pub ablation: String,
    pub n_queries: usize,
    pub n_correct: usize,
    /// `None` for a group with no scored queries.
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_element_accuracy: Option<Vec<f64>>,
    pub parse_failure_count: usize,
    /// Queries whose backend call failed and were therefore not scored.
    pub n_failed: usize,
}

#[derive(Debug, Default, Clone)]
struct Acc {
    n: usize,
    correct: usize,
    parse_failures: usize,
    failed: usize,
    element_hits: Vec<usize>,
    element_n: usize,
}

/// Accumulates records into groups keyed by (task, model, kind, h, ablation).
#[derive(Debug, Default, Clone)]
pub struct Aggregator {
    groups: BTreeMap<GroupKey, Acc>,
}

impl Aggregator {
    /// Ensures a row exists for `key` even if nothing is added to it.
    pub fn expect(&mut self, key: GroupKey) {
        self.groups.entry(key).or_default();
    }

    pub fn add(&mut self, record: &EvalRecord) {
        let acc = self.groups.entry(GroupKey::of(record)).or_default();
        acc.n += 1;
        acc.correct += record.auto_correct as usize;
        acc.parse_failures += record.parsed.is_failure() as usize;
        if let Some(el) = &record.element_correct {
            if acc.element_hits.len() < el.len() {
                acc.element_hits.resize(el.len(), 0);
            }
            for (hit, c) in acc.element_hits.iter_mut().zip(el) {
                *hit += *c as usize;
            }
            acc.element_n += 1;
        }
    }

    pub fn add_failure(&mut self, key: GroupKey) {
        self.groups.entry(key).or_default().failed += 1;
    }

    pub fn finish(self) -> Vec<MetricResult> {
        self.groups
            .into_iter()
            .map(|(k, a)| MetricResult {
                accuracy: (a.n > 0).then(|| a.correct as f64 / a.n as f64),
                per_element_accuracy: (a.element_n > 0)
                    .then(|| a.element_hits.iter().map(|h| *h as f64 / a.element_n as f64).collect()),
                n_queries: a.n,
                n_correct: a.correct,
                parse_failure_count: a.parse_failures,
                n_failed: a.failed,
                task: k.task,
                model: k.model,
                kind: k.kind,
                h: k.h,
                ablation: k.ablation,
            })
            .collect()
    }
}

/// Groups and counts records; rows come out in key order.
pub fn aggregate(records: &[EvalRecord]) -> Vec<MetricResult> {
    let mut agg = Aggregator::default();
    for r in records {
        agg.add(r);
    }
    agg.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n: usize,
    pub manual_accuracy: f64,
    pub automatic_accuracy: f64,
    pub agreement_rate: f64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no manually annotated records")]
    NoAnnotations,
}

/// Manual vs automatic verdicts over the annotated records.
pub fn agreement(records: &[EvalRecord]) -> Result<Agreement, MetricsError> {
    let pairs: Vec<(bool, bool)> = records
        .iter()
        .filter_map(|r| r.manual_correct.map(|m| (m, r.auto_correct)))
        .collect();
    if pairs.is_empty() {
        return Err(MetricsError::NoAnnotations);
    }
    let n = pairs.len() as f64;
    let count = |f: &dyn Fn(&(bool, bool)) -> bool| pairs.iter().filter(|p| f(p)).count() as f64 / n;
    Ok(Agreement {
        n: pairs.len(),
        manual_accuracy: count(&|p| p.0),
        automatic_accuracy: count(&|p| p.1),
        agreement_rate: count(&|p| p.0 == p.1),
    })
}

/// Occurrences of each error type 1..=6; a record counts once per distinct tag.
pub fn error_histogram(records: &[EvalRecord]) -> [usize; 6] {
    let mut out = [0; 6];
    for r in records {
        let tags: BTreeSet<ErrorType> = r.error_tags.iter().copied().collect();
        for t in tags {
            out[t.number() as usize - 1] += 1;
        }
    }
    out
}

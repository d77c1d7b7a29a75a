use rand::Rng;

use super::{AnswerKey, Backend, BackendError, BackendRequest, BackendResponse};
use crate::domain::{Action, ActionSpace, DeltaLabel, GroundTruth, QueryKind};
use crate::parsing::quantize;
use crate::prompting::ActionMode;
use crate::rng;

fn key(req: &BackendRequest) -> Result<&AnswerKey, BackendError> {
    req.answer_key
        .as_ref()
        .ok_or_else(|| BackendError::InvalidRequest(format!("query `{}` carries no answer key", req.query_id)))
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn fenced(stub: String) -> String {
    format!("3. [Formatting]:\n```python\n{stub}\n```\n")
}

fn action_stub(action: &Action, space: &ActionSpace, mode: ActionMode) -> Result<String, BackendError> {
    let list = match (action, space, mode) {
        (Action::Discrete(a), ActionSpace::Discrete { .. }, _) => a.to_string(),
        (Action::Continuous(v), ActionSpace::Continuous { bounds }, ActionMode::Bins { n }) => {
            let bins = v
                .iter()
                .zip(bounds)
                .map(|(x, b)| quantize(*x, b, n))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
            join(bins)
        }
        (Action::Continuous(v), ActionSpace::Continuous { .. }, ActionMode::Absolute) => join(v),
        _ => return Err(BackendError::InvalidRequest("ground truth does not fit the action space".into())),
    };
    Ok(format!("action_choice = [{list}]"))
}

fn labels_stub(labels: &[DeltaLabel]) -> String {
    format!("state_change = [{}]", join(labels.iter().map(DeltaLabel::word)))
}

/// Answers every query correctly from its answer key.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl OracleBackend {
    pub fn answer(key: &AnswerKey) -> Result<String, BackendError> {
        let stub = match (&key.kind, &key.truth) {
            (QueryKind::NextAction | QueryKind::LastAction, GroundTruth::Action { action }) => {
                action_stub(action, &key.action_space, key.action_mode)?
            }
            (QueryKind::NextState | QueryKind::LastState, GroundTruth::StateChange { labels, .. }) => {
                labels_stub(labels)
            }
            (QueryKind::JudgeNextAction, GroundTruth::Judgment { proposal_is_truth, .. }) => {
                format!("judgment = [{}]", if *proposal_is_truth { "agree" } else { "disagree" })
            }
            (kind, _) => {
                return Err(BackendError::InvalidRequest(format!("ground truth does not match kind {kind}")))
            }
        };
        Ok(fenced(stub))
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        "oracle"
    }

    fn needs_answer_key(&self) -> bool {
        true
    }

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        req.validate()?;
        Ok(BackendResponse {
            text: Self::answer(key(req)?)?,
            usage: None,
            latency_ms: 0,
            attempts: 1,
        })
    }
}

/// Uniformly random well-formed answers, reproducible per `(seed, query_id)`.
#[derive(Debug, Clone)]
pub struct RandomBackend {
    seed: u64,
    id: String,
}

impl RandomBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            id: "random".into(),
        }
    }

    pub fn answer(&self, query_id: &str, key: &AnswerKey) -> String {
        let mut r = rng::stream("random_backend", &[&self.seed, &query_id]);
        let stub = match key.kind {
            QueryKind::NextAction | QueryKind::LastAction => {
                let list = match (&key.action_space, key.action_mode) {
                    (ActionSpace::Discrete { n }, _) => r.gen_range(0..*n).to_string(),
                    (ActionSpace::Continuous { bounds }, ActionMode::Bins { n }) => {
                        join(bounds.iter().map(|_| r.gen_range(0..n)))
                    }
                    (ActionSpace::Continuous { bounds }, ActionMode::Absolute) => {
                        join(bounds.iter().map(|b| r.gen_range(b.low..=b.high)))
                    }
                };
                format!("action_choice = [{list}]")
            }
            QueryKind::NextState | QueryKind::LastState => {
                let labels: Vec<DeltaLabel> = (0..key.state_dim)
                    .map(|_| DeltaLabel::from_code(r.gen_range(0..3)).expect("code in range"))
                    .collect();
                labels_stub(&labels)
            }
            QueryKind::JudgeNextAction => {
                format!("judgment = [{}]", if r.gen_bool(0.5) { "agree" } else { "disagree" })
            }
        };
        fenced(stub)
    }
}

impl Backend for RandomBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn needs_answer_key(&self) -> bool {
        true
    }

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        req.validate()?;
        Ok(BackendResponse {
            text: self.answer(&req.query_id, key(req)?),
            usage: None,
            latency_ms: 0,
            attempts: 1,
        })
    }
}

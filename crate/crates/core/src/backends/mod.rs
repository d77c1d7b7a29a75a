//! Chat-completion backends: a remote OpenAI-compatible client and three
//! local deterministic stand-ins (replay, oracle, random).

mod local;
mod remote;
mod replay;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{ActionSpace, GroundTruth, QueryKind};
use crate::prompting::ActionMode;

pub use local::{OracleBackend, RandomBackend};
pub use remote::{RemoteBackend, RemoteConfig};
pub use replay::{ReplayBackend, TranscriptEntry, TranscriptWriter};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

/// Ground truth handed to local backends out of band. Remote backends never
/// see it.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerKey {
    pub kind: QueryKind,
    pub truth: GroundTruth,
    pub action_space: ActionSpace,
    pub state_dim: usize,
    pub action_mode: ActionMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest {
    pub query_id: String,
    pub model: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Prompt fingerprint, the transcript key.
    pub fingerprint: String,
    pub answer_key: Option<AnswerKey>,
}

impl BackendRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.system_text.is_empty() || self.user_text.is_empty() {
            return Err(BackendError::InvalidRequest("prompt texts must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackendResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency_ms: u64,
    /// Attempts made, including the successful one.
    pub attempts: u32,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limit still exceeded after {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("transport error after {attempts} attempts: {reason}")]
    Transport { attempts: u32, reason: String },
    #[error("malformed server reply: {0}")]
    MalformedServerReply(String),
    #[error("no transcript entry for prompt fingerprint {fingerprint}")]
    MissingTranscript { fingerprint: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Short stable tag for reports.
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Auth(_) => "auth_error",
            BackendError::RateLimitExhausted { .. } => "rate_limit_exhausted",
            BackendError::Transport { .. } => "transport_error",
            BackendError::MalformedServerReply(_) => "malformed_server_reply",
            BackendError::MissingTranscript { .. } => "missing_transcript",
            BackendError::InvalidRequest(_) => "invalid_request",
            BackendError::Config(_) => "config_error",
        }
    }

    /// Errors that make every further request pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth(_) | BackendError::Config(_))
    }
}

pub trait Backend: Send + Sync {
    /// Model id recorded on every result.
    fn id(&self) -> &str;

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError>;

    /// Whether requests must carry an `AnswerKey`.
    fn needs_answer_key(&self) -> bool {
        false
    }

    fn temperature(&self) -> f64 {
        DEFAULT_TEMPERATURE
    }

    fn max_tokens(&self) -> u32 {
        DEFAULT_MAX_TOKENS
    }
}

/// How a plan names a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendSpec {
    Oracle,
    Random {
        #[serde(default)]
        seed: u64,
    },
    Replay {
        transcript: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Remote {
        config: PathBuf,
    },
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Oracle => f.write_str("oracle"),
            BackendSpec::Random { seed } => write!(f, "random:{seed}"),
            BackendSpec::Replay { transcript, .. } => write!(f, "replay:{}", transcript.display()),
            BackendSpec::Remote { config } => write!(f, "remote:{}", config.display()),
        }
    }
}

/// `oracle`, `random[:SEED]`, `replay:TRANSCRIPT` or `remote:CONFIG`.
impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head.trim().to_ascii_lowercase().as_str(), rest) {
            ("oracle", None) => Ok(BackendSpec::Oracle),
            ("random", None) => Ok(BackendSpec::Random { seed: 0 }),
            ("random", Some(seed)) => seed
                .parse()
                .map(|seed| BackendSpec::Random { seed })
                .map_err(|_| format!("bad random seed `{seed}`")),
            ("replay", Some(p)) if !p.is_empty() => Ok(BackendSpec::Replay {
                transcript: p.into(),
                name: None,
            }),
            ("remote", Some(p)) if !p.is_empty() => Ok(BackendSpec::Remote { config: p.into() }),
            _ => Err(format!(
                "unknown backend `{s}`; expected oracle, random[:SEED], replay:TRANSCRIPT or remote:CONFIG"
            )),
        }
    }
}

impl BackendSpec {
    /// Instantiates the backend. Remote transcripts default to
    /// `default_transcript` when the config names none.
    pub fn build(&self, default_transcript: Option<&Path>) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendSpec::Oracle => Box::new(OracleBackend),
            BackendSpec::Random { seed } => Box::new(RandomBackend::new(*seed)),
            BackendSpec::Replay { transcript, name } => {
                let mut b = ReplayBackend::load(transcript)?;
                if let Some(n) = name {
                    b = b.named(n);
                }
                Box::new(b)
            }
            BackendSpec::Remote { config } => {
                let mut cfg = RemoteConfig::load(config)?;
                if cfg.record_transcript && cfg.transcript.is_none() {
                    cfg.transcript = default_transcript.map(Path::to_path_buf);
                }
                Box::new(RemoteBackend::new(cfg)?)
            }
        })
    }
}

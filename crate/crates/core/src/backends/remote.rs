use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, BackendError, BackendRequest, BackendResponse, TranscriptEntry, TranscriptWriter, Usage};

/// Settings for an OpenAI-compatible `/chat/completions` endpoint, usually
/// read from a TOML file. The key itself is read from `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Id recorded on results; defaults to `model`.
    pub name: Option<String>,
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
    pub max_in_flight: usize,
    /// 0 disables the limit.
    pub requests_per_minute: u32,
    pub timeout_secs: u64,
    pub record_transcript: bool,
    pub transcript: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            name: None,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: super::DEFAULT_TEMPERATURE,
            max_tokens: super::DEFAULT_MAX_TOKENS,
            max_retries: 5,
            backoff_initial_ms: 500,
            backoff_max_ms: 30_000,
            max_in_flight: 4,
            requests_per_minute: 0,
            timeout_secs: 120,
            record_transcript: true,
            transcript: None,
        }
    }
}

impl RemoteConfig {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RemoteConfig =
            toml::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        // Relative transcript paths are relative to the config file.
        let cfg = match (&cfg.transcript, path.parent()) {
            (Some(t), Some(dir)) if t.is_relative() => RemoteConfig {
                transcript: Some(dir.join(t)),
                ..cfg
            },
            _ => cfg,
        };
        Ok(cfg)
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Sliding one-minute window of request start times.
#[derive(Debug)]
struct RateWindow {
    per_minute: u32,
    starts: Mutex<VecDeque<Instant>>,
}

impl RateWindow {
    fn wait_turn(&self) {
        if self.per_minute == 0 {
            return;
        }
        let window = Duration::from_secs(60);
        loop {
            let mut starts = self.starts.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            while starts.front().is_some_and(|t| now.duration_since(*t) >= window) {
                starts.pop_front();
            }
            if starts.len() < self.per_minute as usize {
                starts.push_back(now);
                return;
            }
            let wait = window - now.duration_since(*starts.front().expect("non-empty"));
            drop(starts);
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug)]
pub struct RemoteBackend {
    id: String,
    cfg: RemoteConfig,
    url: String,
    api_key: String,
    client: Client,
    gate: Gate,
    rate: RateWindow,
    transcript: Option<TranscriptWriter>,
}

enum Attempt {
    Done(String, Option<Usage>),
    Retry(BackendError, Option<Duration>),
    Fail(BackendError),
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl RemoteBackend {
    /// Fails with `AuthError` when the key variable is unset or empty.
    pub fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::Auth(format!("environment variable {} is not set", cfg.api_key_env)))?;
        if cfg.endpoint.trim().is_empty() || cfg.model.trim().is_empty() {
            return Err(BackendError::Config("endpoint and model must be set".into()));
        }
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let transcript = match (&cfg.transcript, cfg.record_transcript) {
            (Some(p), true) => Some(
                TranscriptWriter::append(p)
                    .map_err(|e| BackendError::Config(format!("cannot open transcript {}: {e}", p.display())))?,
            ),
            _ => None,
        };
        Ok(Self {
            id: cfg.name.clone().unwrap_or_else(|| cfg.model.clone()),
            url: format!("{}/chat/completions", cfg.endpoint.trim_end_matches('/')),
            api_key,
            client,
            gate: Gate::new(cfg.max_in_flight),
            rate: RateWindow {
                per_minute: cfg.requests_per_minute,
                starts: Mutex::new(VecDeque::new()),
            },
            transcript,
            cfg,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn attempt(&self, req: &BackendRequest, attempts: u32) -> Attempt {
        let body = json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        self.rate.wait_turn();
        let resp = {
            let _permit = self.gate.acquire();
            self.client.post(&self.url).bearer_auth(&self.api_key).json(&body).send()
        };
        let resp = match resp {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(
                    BackendError::Transport {
                        attempts,
                        reason: e.to_string(),
                    },
                    None,
                )
            }
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(
                    BackendError::Transport {
                        attempts,
                        reason: e.to_string(),
                    },
                    None,
                )
            }
        };
        match status {
            s if s.is_success() => match serde_json::from_str::<ChatReply>(&text) {
                Ok(reply) => match reply.choices.into_iter().next().and_then(|c| c.message.content) {
                    Some(content) => Attempt::Done(content, reply.usage),
                    None => Attempt::Fail(BackendError::MalformedServerReply("no message content".into())),
                },
                Err(e) => Attempt::Fail(BackendError::MalformedServerReply(e.to_string())),
            },
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Attempt::Fail(BackendError::Auth(format!("server answered {status}")))
            }
            StatusCode::TOO_MANY_REQUESTS => Attempt::Retry(BackendError::RateLimitExhausted { attempts }, retry_after),
            s if s.is_server_error() || s == StatusCode::REQUEST_TIMEOUT => Attempt::Retry(
                BackendError::Transport {
                    attempts,
                    reason: format!("server answered {status}"),
                },
                retry_after,
            ),
            _ => Attempt::Fail(BackendError::Transport {
                attempts,
                reason: format!("server answered {status}: {}", text.chars().take(200).collect::<String>()),
            }),
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .cfg
            .backoff_initial_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.cfg.backoff_max_ms);
        Duration::from_millis(ms)
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn temperature(&self) -> f64 {
        self.cfg.temperature
    }

    fn max_tokens(&self) -> u32 {
        self.cfg.max_tokens
    }

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        req.validate()?;
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(req, attempts) {
                Attempt::Done(text, usage) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    if let Some(t) = &self.transcript {
                        let entry = TranscriptEntry {
                            fingerprint: req.fingerprint.clone(),
                            query_id: req.query_id.clone(),
                            model: self.id.clone(),
                            response: text.clone(),
                            latency_ms,
                            usage,
                        };
                        if let Err(e) = t.record(&entry) {
                            log::warn!("could not append to transcript {}: {e}", t.path().display());
                        }
                    }
                    return Ok(BackendResponse {
                        text,
                        usage,
                        latency_ms,
                        attempts,
                    });
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e, hint) => {
                    if attempts > self.cfg.max_retries {
                        return Err(e);
                    }
                    let wait = hint
                        .map(|h| h.min(Duration::from_millis(self.cfg.backoff_max_ms)))
                        .unwrap_or_else(|| self.backoff(attempts - 1));
                    log::debug!("{}: retrying after {e} in {wait:?}", req.query_id);
                    std::thread::sleep(wait);
                }
            }
        }
    }
}

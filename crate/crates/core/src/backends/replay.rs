use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse, Usage};

/// One recorded exchange, stored as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub query_id: String,
    pub model: String,
    pub response: String,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// Appends transcript entries, one flushed line per call.
#[derive(Debug)]
pub struct TranscriptWriter {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl TranscriptWriter {
    pub fn append(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            out: Mutex::new(BufWriter::new(f)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&self, entry: &TranscriptEntry) -> std::io::Result<()> {
        let line = serde_json::to_string(entry).expect("transcript entry serializes");
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(out, "{line}")?;
        out.flush()
    }
}

/// Serves recorded responses by prompt fingerprint. A later entry for the
/// same fingerprint replaces an earlier one.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    id: String,
    entries: HashMap<String, TranscriptEntry>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut map = HashMap::new();
        let mut models = Vec::new();
        for e in entries {
            if !models.contains(&e.model) {
                models.push(e.model.clone());
            }
            map.insert(e.fingerprint.clone(), e);
        }
        let id = match models.as_slice() {
            [only] => only.clone(),
            _ => "replay".to_string(),
        };
        Self { id, entries: map }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let f = File::open(path)
            .map_err(|e| BackendError::Config(format!("cannot open transcript {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    /// Overrides the model id recorded on results.
    pub fn named(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let e = self
            .entries
            .get(&req.fingerprint)
            .ok_or_else(|| BackendError::MissingTranscript {
                fingerprint: req.fingerprint.clone(),
            })?;
        Ok(BackendResponse {
            text: e.response.clone(),
            usage: e.usage,
            latency_ms: e.latency_ms,
            attempts: 1,
        })
    }
}

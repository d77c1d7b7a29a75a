use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::RunError;

/// Append-only JSON Lines file, one flushed line per entry.
///
/// Opening an existing journal drops a torn final line (a crash mid-write);
/// a malformed line anywhere else is an error.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    out: BufWriter<File>,
}

/// Parses every complete line and returns the byte length of the valid prefix.
pub fn read_entries<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, u64), RunError> {
    let mut text = String::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_string(&mut text).map_err(|e| RunError::io(path, e))?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(RunError::io(path, e)),
    }
    let mut entries = Vec::new();
    let mut valid = 0u64;
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        offset += line.len();
        let is_last = i + 1 == lines.len();
        if line.trim().is_empty() {
            valid = offset as u64;
            continue;
        }
        match serde_json::from_str::<T>(line.trim_end()) {
            Ok(v) if line.ends_with('\n') => {
                entries.push(v);
                valid = offset as u64;
            }
            // A final line without its newline was cut short, even if it parses.
            _ if is_last => break,
            Ok(_) => unreachable!("only the last line can lack a newline"),
            Err(e) => {
                return Err(RunError::Journal(format!("{} line {}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok((entries, valid))
}

impl Journal {
    /// Opens for appending and returns the entries already present.
    pub fn open<T: DeserializeOwned>(path: &Path) -> Result<(Self, Vec<T>), RunError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
        }
        let (entries, valid) = read_entries(path)?;
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| RunError::io(path, e))?;
        let len = f.metadata().map_err(|e| RunError::io(path, e))?.len();
        if len > valid {
            log::warn!("{}: dropping {} bytes of a torn final line", path.display(), len - valid);
            f.set_len(valid).map_err(|e| RunError::io(path, e))?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                out: BufWriter::new(f),
            },
            entries,
        ))
    }

    pub fn append<T: Serialize>(&mut self, entry: &T) -> Result<(), RunError> {
        let line = serde_json::to_string(entry).map_err(|e| RunError::Journal(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| RunError::io(&self.path, e))?;
        self.out.flush().map_err(|e| RunError::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

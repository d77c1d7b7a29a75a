//! Interactive manual review of scored records.
//!
//! The reviewer sees the history, the question and the raw response, decides
//! first, and only then is shown the automatic verdict. Each decision is
//! appended to `annotations.jsonl` before the next record is shown.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::journal::Journal;
use super::RunError;
use crate::domain::{ErrorType, EvalRecord};
use crate::prompting::{render_history, render_question};
use crate::tasks;

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const RUBRIC: &str = include_str!("../../assets/annotation_rubric.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub key: String,
    pub reviewer: String,
    pub manual_correct: bool,
    #[serde(default)]
    pub error_tags: Vec<ErrorType>,
}

/// Copies decisions onto matching records; the latest decision per key wins.
pub fn apply_annotations(records: &mut [EvalRecord], annotations: &[Annotation]) {
    let latest: HashMap<&str, &Annotation> = annotations.iter().map(|a| (a.key.as_str(), a)).collect();
    for r in records {
        if let Some(a) = latest.get(r.key().as_str()) {
            r.manual_correct = Some(a.manual_correct);
            r.error_tags = a.error_tags.clone();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnnotateSummary {
    pub already_done: usize,
    pub annotated_now: usize,
    pub skipped: usize,
    pub remaining: usize,
    pub quit: bool,
}

fn io_err(e: std::io::Error) -> RunError {
    RunError::Io {
        path: "<terminal>".into(),
        reason: e.to_string(),
    }
}

/// Reads one trimmed line; `None` on end of input.
fn ask<R: BufRead, W: Write>(input: &mut R, out: &mut W, prompt: &str) -> Result<Option<String>, RunError> {
    write!(out, "{prompt}").map_err(io_err)?;
    out.flush().map_err(io_err)?;
    let mut line = String::new();
    if input.read_line(&mut line).map_err(io_err)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

pub fn parse_tags(text: &str) -> Result<Vec<ErrorType>, String> {
    let mut tags = Vec::new();
    for tok in text.split([',', ' ']).filter(|t| !t.is_empty()) {
        let n: u8 = tok.parse().map_err(|_| format!("`{tok}` is not a number 1-6"))?;
        let t = ErrorType::try_from(n)?;
        if !tags.contains(&t) {
            tags.push(t);
        }
    }
    tags.sort();
    Ok(tags)
}

fn show<W: Write>(out: &mut W, pos: usize, total: usize, r: &EvalRecord) -> Result<(), RunError> {
    let q = &r.query;
    writeln!(out, "\n=== [{pos}/{total}] {} ({}) ===", q.query_id, r.model).map_err(io_err)?;
    writeln!(out, "\n{}", render_history(&q.window, &r.config)).map_err(io_err)?;
    match tasks::lookup(&q.task).map(|t| render_question(q, t, &r.config)) {
        Some(Ok(text)) => writeln!(out, "\nQuestion:\n{text}").map_err(io_err)?,
        _ => writeln!(out, "\nQuestion inputs: {}", serde_json::to_string(&q.inputs).unwrap_or_default())
            .map_err(io_err)?,
    }
    writeln!(out, "\n--- model response ---\n{}\n----------------------", r.raw_response).map_err(io_err)
}

/// Walks `queue` in order, skipping records already in the annotation
/// journal at `journal_path`.
pub fn annotate<R: BufRead, W: Write>(
    queue: &[EvalRecord],
    journal_path: &Path,
    reviewer: &str,
    mut input: R,
    mut out: W,
) -> Result<AnnotateSummary, RunError> {
    let (mut journal, existing) = Journal::open::<Annotation>(journal_path)?;
    let done: HashSet<String> = existing.into_iter().map(|a| a.key).collect();
    let mut summary = AnnotateSummary::default();
    let todo: Vec<&EvalRecord> = queue
        .iter()
        .filter(|r| {
            let seen = done.contains(&r.key());
            summary.already_done += seen as usize;
            !seen
        })
        .collect();
    writeln!(out, "{RUBRIC}").map_err(io_err)?;
    writeln!(out, "{} records to review ({} already annotated).", todo.len(), summary.already_done).map_err(io_err)?;

    let mut handled = 0;
    'records: for (k, r) in todo.iter().enumerate() {
        show(&mut out, k + 1, todo.len(), r)?;
        let verdict = loop {
            match ask(&mut input, &mut out, "Correct? [y]es / [n]o / [s]kip / [q]uit: ")? {
                None => {
                    summary.quit = true;
                    break 'records;
                }
                Some(a) => match a.to_ascii_lowercase().as_str() {
                    "y" | "yes" => break Some(true),
                    "n" | "no" => break Some(false),
                    "s" | "skip" => break None,
                    "q" | "quit" => {
                        summary.quit = true;
                        break 'records;
                    }
                    _ => writeln!(out, "Please answer y, n, s or q.").map_err(io_err)?,
                },
            }
        };
        let Some(manual_correct) = verdict else {
            summary.skipped += 1;
            handled += 1;
            continue;
        };
        let tags = loop {
            match ask(&mut input, &mut out, "Error types 1-6, comma separated (blank for none): ")? {
                None => {
                    summary.quit = true;
                    break 'records;
                }
                Some(text) => match parse_tags(&text) {
                    Ok(tags) => break tags,
                    Err(e) => writeln!(out, "Invalid tags: {e}. Try again.").map_err(io_err)?,
                },
            }
        };
        journal.append(&Annotation {
            key: r.key(),
            reviewer: reviewer.to_string(),
            manual_correct,
            error_tags: tags,
        })?;
        summary.annotated_now += 1;
        handled += 1;
        writeln!(
            out,
            "Automatic verdict: {} (parsed {})",
            if r.auto_correct { "correct" } else { "incorrect" },
            serde_json::to_string(&r.parsed).unwrap_or_default()
        )
        .map_err(io_err)?;
    }
    summary.remaining = todo.len() - handled + summary.skipped;
    Ok(summary)
}

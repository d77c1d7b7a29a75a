use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::RunError;
use crate::metrics::MetricResult;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SERIES_DIR: &str = "series";

fn fixed(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), |v| format!("{v:.6}"))
}

fn csv_err(path: &Path, e: csv::Error) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// One row per metric cell, fixed six-decimal numbers, `null` for
/// undefined accuracies.
pub fn write_metrics_csv(rows: &[MetricResult], unchanged_epsilon: f64, path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "task",
        "model",
        "kind",
        "h",
        "ablation",
        "n_queries",
        "n_correct",
        "accuracy",
        "parse_failure_count",
        "n_failed",
        "per_element_accuracy",
        "unchanged_epsilon",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in rows {
        let per_element = r.per_element_accuracy.as_ref().map_or_else(String::new, |v| {
            v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";")
        });
        w.write_record([
            r.task.clone(),
            r.model.clone(),
            r.kind.to_string(),
            r.h.to_string(),
            r.ablation.clone(),
            r.n_queries.to_string(),
            r.n_correct.to_string(),
            fixed(r.accuracy),
            r.parse_failure_count.to_string(),
            r.n_failed.to_string(),
            per_element,
            format!("{unchanged_epsilon:e}"),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

fn file_part(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Accuracy-vs-h files, one per (task, model, kind, ablation). Returns the
/// paths written, in order.
pub fn write_series(rows: &[MetricResult], dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut groups: BTreeMap<(String, String, String, String), Vec<&MetricResult>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.task.clone(), r.model.clone(), r.kind.to_string(), r.ablation.clone()))
            .or_default()
            .push(r);
    }
    let mut written = Vec::new();
    for ((task, model, kind, ablation), mut rs) in groups {
        rs.sort_by_key(|r| r.h);
        let path = dir.join(format!(
            "{}__{}__{}__{}.csv",
            file_part(&task),
            file_part(&model),
            file_part(&kind),
            file_part(&ablation)
        ));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["h", "accuracy", "n_queries", "n_correct"])
            .map_err(|e| csv_err(&path, e))?;
        for r in rs {
            w.write_record([r.h.to_string(), fixed(r.accuracy), r.n_queries.to_string(), r.n_correct.to_string()])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes both the flat table and the series directory under `dir`.
pub fn write_reports(rows: &[MetricResult], unchanged_epsilon: f64, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    write_metrics_csv(rows, unchanged_epsilon, &dir.join(METRICS_FILE))?;
    let series = dir.join(SERIES_DIR);
    if series.exists() {
        // Stale series from a differently shaped earlier report would linger.
        std::fs::remove_dir_all(&series).map_err(|e| RunError::io(&series, e))?;
    }
    write_series(rows, &series)?;
    Ok(())
}

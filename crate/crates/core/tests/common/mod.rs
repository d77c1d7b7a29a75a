#![allow(dead_code)]

pub mod criteria;
pub mod fixtures;
pub mod oracle;

use std::path::Path;

use mindprobe::backends::{Backend, BackendSpec};
use mindprobe::domain::{EvalRecord, QueryKind};
use mindprobe::runner::{self, DatasetRef, RunControl, RunOutcome, RunPlan};

pub fn collect_ref(task: &str, episodes: usize, seed: u64, max_steps: Option<usize>) -> DatasetRef {
    DatasetRef::Collect {
        task: task.into(),
        episodes,
        seed,
        max_steps,
        policy: None,
        kinds: None,
    }
}

/// A single-backend plan writing into `out`.
pub fn plan(datasets: Vec<DatasetRef>, backend: BackendSpec, kinds: &[QueryKind], h: &[usize], out: &Path) -> RunPlan {
    let mut p = RunPlan::default_suite(backend);
    p.datasets = datasets;
    p.kinds = kinds.to_vec();
    p.h_values = h.to_vec();
    p.output_dir = out.to_path_buf();
    p
}

pub fn run_plan(p: &RunPlan, control: RunControl) -> Result<RunOutcome, runner::RunError> {
    let resolved = p.resolve()?;
    let transcript = p.output_dir.join(runner::TRANSCRIPT_FILE);
    let backends = p
        .backends
        .iter()
        .map(|b| b.build(Some(&transcript)))
        .collect::<Result<Vec<Box<dyn Backend>>, _>>()?;
    runner::run(&resolved, &backends, control)
}

pub fn run_with(p: &RunPlan, backends: &[Box<dyn Backend>], control: RunControl) -> Result<RunOutcome, runner::RunError> {
    runner::run(&p.resolve()?, backends, control)
}

pub fn read_journal(dir: &Path) -> Vec<EvalRecord> {
    runner::journal::read_entries::<EvalRecord>(&dir.join(runner::JOURNAL_FILE))
        .expect("journal readable")
        .0
}

/// Every file under `dir`, as (relative path, bytes), sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

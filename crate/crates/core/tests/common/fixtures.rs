use std::path::PathBuf;

use serde::Deserialize;

use mindprobe::dataset::{self, Dataset, QueryOptions};
use mindprobe::domain::{ErrorType, EvalQuery, EvalRecord, QueryKind, TaskSpec};
use mindprobe::envs::BuiltinEnv;
use mindprobe::parsing::ParsedAnswer;
use mindprobe::policies;
use mindprobe::prompting::{ActionMode, PromptConfig};
use mindprobe::tasks;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

#[derive(Debug, Deserialize)]
pub struct ParserCase {
    pub name: String,
    pub task: String,
    pub kind: QueryKind,
    #[serde(default)]
    pub mode: ActionMode,
    pub text: String,
    pub expected: ParsedAnswer,
}

impl ParserCase {
    pub fn task(&self) -> &'static TaskSpec {
        tasks::lookup(&self.task).expect("corpus task is registered")
    }
}

pub fn parser_corpus() -> Vec<ParserCase> {
    #[derive(Deserialize)]
    struct File {
        case: Vec<ParserCase>,
    }
    let text = std::fs::read_to_string(data_dir().join("parser_corpus.toml")).unwrap();
    toml::from_str::<File>(&text).unwrap().case
}

pub fn small_dataset(env: BuiltinEnv, episodes: usize, seed: u64, max_steps: Option<usize>) -> Dataset {
    dataset::collect(env, policies::scripted(env).as_ref(), episodes, seed, max_steps).unwrap()
}

pub fn queries(ds: &Dataset, kind: QueryKind, h: usize) -> Vec<EvalQuery> {
    dataset::enumerate_queries(ds, kind, &QueryOptions::new(h)).unwrap()
}

/// A record with the given verdicts; everything else is plausible filler.
pub fn record(query: EvalQuery, model: &str, auto: bool, manual: Option<bool>, tags: &[u8]) -> EvalRecord {
    let config = PromptConfig::default();
    EvalRecord {
        query,
        model: model.into(),
        prompt_fingerprint: "0".repeat(16),
        config_fingerprint: config.fingerprint(),
        config,
        raw_response: String::new(),
        parsed: ParsedAnswer::ParseFailure("no pattern".into()),
        auto_correct: auto,
        element_correct: None,
        manual_correct: manual,
        error_tags: tags.iter().map(|&t| ErrorType::try_from(t).unwrap()).collect(),
        latency_ms: 0,
    }
}

/// Fifty annotated MountainCar judgment records with a chosen 2x2 split of
/// (manual, automatic) verdicts: 18 both correct, 2 manual only, 8 automatic
/// only, 22 neither. By hand: manual 20/50, automatic 26/50, agreement 40/50.
pub fn agreement_records() -> Vec<EvalRecord> {
    let ds = small_dataset(BuiltinEnv::MountainCar, 1, 0, None);
    let qs = queries(&ds, QueryKind::JudgeNextAction, 4);
    assert!(qs.len() >= 50);
    let split = [(true, true, 18), (true, false, 2), (false, true, 8), (false, false, 22)];
    let mut out = Vec::new();
    let mut q = qs.into_iter();
    for (manual, auto, n) in split {
        for _ in 0..n {
            out.push(record(q.next().unwrap(), "fixture-model", auto, Some(manual), &[]));
        }
    }
    out
}

/// Per-type error counts over the fifty reviewed MountainCar responses of the
/// smallest model in the published comparison.
pub const PUBLISHED_HISTOGRAM: [usize; 6] = [30, 19, 18, 2, 25, 10];

/// Fifty records whose tags add up to [`PUBLISHED_HISTOGRAM`]. Tags are dealt
/// round-robin so many records carry several types; one record repeats a tag
/// to check it is counted once.
pub fn histogram_records() -> Vec<EvalRecord> {
    let ds = small_dataset(BuiltinEnv::MountainCar, 1, 0, None);
    let qs = queries(&ds, QueryKind::JudgeNextAction, 4);
    let mut tags: Vec<Vec<u8>> = vec![Vec::new(); 50];
    let mut slot = 0;
    for (k, &count) in PUBLISHED_HISTOGRAM.iter().enumerate() {
        for _ in 0..count {
            tags[slot % 50].push(k as u8 + 1);
            slot += 1;
        }
    }
    let repeat = tags[0][0];
    tags[0].push(repeat);
    qs.into_iter()
        .zip(tags)
        .map(|(q, t)| record(q, "fixture-model", false, Some(false), &t))
        .collect()
}

//! One check per acceptance criterion. Each returns a short detail line on
//! success and the reason on failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindprobe::backends::{Backend, BackendError, BackendRequest, BackendResponse, BackendSpec, TranscriptEntry};
use mindprobe::domain::{Action, Bounds, EvalQuery, GroundTruth, QueryKind};
use mindprobe::envs::{acrobot, BuiltinEnv};
use mindprobe::metrics::{self, score_answer};
use mindprobe::parsing::{self, parse_response, quantize, ParsedAnswer};
use mindprobe::prompting::{render, system_sections, ActionMode, PromptConfig};
use mindprobe::runner::{self, RunControl};
use mindprobe::tasks;

use super::fixtures::{self, small_dataset};
use super::{collect_ref, oracle, plan, read_journal, run_plan, run_with, snapshot};

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub const DYNAMICS_PAIRS: usize = 10_000;

pub fn dynamics_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pi = std::f64::consts::PI;
    let mut worst = [0.0f64; 3];

    for _ in 0..DYNAMICS_PAIRS {
        let s = [rng.gen_range(-1.2..=0.6), rng.gen_range(-0.07..=0.07)];
        let a = rng.gen_range(0..3usize);
        let got = BuiltinEnv::MountainCar.step(&s, &Action::Discrete(a)).map_err(|e| e.to_string())?;
        let (want, r, done) = oracle::mountain_car(s[0], s[1], a);
        worst[0] = worst[0].max(max_diff(&got.state, &want));
        ensure(got.reward == r && got.terminated == done, || format!("MountainCar reward/termination differ at {s:?}, a={a}"))?;
    }
    for _ in 0..DYNAMICS_PAIRS {
        let j = [
            rng.gen_range(-pi..pi),
            rng.gen_range(-pi..pi),
            rng.gen_range(-4.0 * pi..=4.0 * pi),
            rng.gen_range(-9.0 * pi..=9.0 * pi),
        ];
        let obs = acrobot::observe(&j);
        let a = rng.gen_range(0..3usize);
        let got = BuiltinEnv::Acrobot.step(&obs, &Action::Discrete(a)).map_err(|e| e.to_string())?;
        let (want, r, done) = oracle::acrobot(&obs, a);
        worst[1] = worst[1].max(max_diff(&got.state, &want));
        ensure(got.reward == r && got.terminated == done, || format!("Acrobot reward/termination differ at {j:?}, a={a}"))?;
    }
    for _ in 0..DYNAMICS_PAIRS {
        let th: f64 = rng.gen_range(-pi..pi);
        let obs = [th.cos(), th.sin(), rng.gen_range(-8.0..=8.0)];
        let u = rng.gen_range(-3.0..=3.0);
        let got = BuiltinEnv::Pendulum.step(&obs, &Action::Continuous(vec![u])).map_err(|e| e.to_string())?;
        let (want, r) = oracle::pendulum(obs, u);
        worst[2] = worst[2].max(max_diff(&got.state, &want));
        ensure((got.reward - r).abs() <= 1e-12 && !got.terminated, || format!("Pendulum reward differs at {obs:?}, u={u}"))?;
    }
    for (name, w) in ["MountainCar", "Acrobot", "Pendulum"].iter().zip(worst) {
        ensure(w <= 1e-12, || format!("{name} max component error {w:e} > 1e-12"))?;
    }

    let wall = BuiltinEnv::MountainCar
        .step(&[-1.19, -0.05], &Action::Discrete(0))
        .map_err(|e| e.to_string())?;
    ensure(wall.state[0] == -1.2 && wall.state[1] == 0.0, || format!("left wall gave {:?}", wall.state))?;

    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "3x{DYNAMICS_PAIRS} pairs, max error {:.1e}/{:.1e}/{:.1e}, wall velocity 0, {:.2}s",
        worst[0],
        worst[1],
        worst[2],
        elapsed.as_secs_f64()
    ))
}

pub fn dataset_shapes() -> Check {
    let mc = small_dataset(BuiltinEnv::MountainCar, 5, 7, None);
    ensure(mc.episodes.len() == 5, || "MountainCar episode count".into())?;
    ensure(mc.task.state_dim == 2, || "MountainCar state dim".into())?;
    ensure(mc.task.action_space == mindprobe::domain::ActionSpace::Discrete { n: 3 }, || "MountainCar actions".into())?;
    for ep in &mc.episodes {
        ensure((80..=200).contains(&ep.len()), || format!("MountainCar episode {} has {} steps", ep.id, ep.len()))?;
        ensure(ep.steps.iter().all(|s| s.state.len() == 2), || "MountainCar state width".into())?;
    }

    let ac = small_dataset(BuiltinEnv::Acrobot, 3, 7, None);
    ensure(ac.episodes.len() == 3 && ac.task.state_dim == 6, || "Acrobot shape".into())?;
    for ep in &ac.episodes {
        ensure(ep.terminated && ep.len() <= 500, || format!("Acrobot episode {} ran {} steps, terminated={}", ep.id, ep.len(), ep.terminated))?;
        ensure(ep.steps.iter().all(|s| s.state.len() == 6), || "Acrobot state width".into())?;
    }

    let pe = small_dataset(BuiltinEnv::Pendulum, 3, 7, Some(50));
    ensure(pe.episodes.len() == 3 && pe.task.state_dim == 3, || "Pendulum shape".into())?;
    ensure(pe.task.action_space.dim() == 1 && !pe.task.action_space.is_discrete(), || "Pendulum actions".into())?;
    for ep in &pe.episodes {
        ensure(ep.len() == 50, || format!("Pendulum episode {} has {} steps", ep.id, ep.len()))?;
        ensure(
            ep.steps.iter().all(|s| s.state.len() == 3 && s.action.as_continuous().is_some_and(|a| a.len() == 1)),
            || "Pendulum step shape".into(),
        )?;
    }
    let lens = |d: &mindprobe::dataset::Dataset| d.episodes.iter().map(|e| e.len().to_string()).collect::<Vec<_>>().join("/");
    Ok(format!("MountainCar {} steps, Acrobot {}, Pendulum {}", lens(&mc), lens(&ac), lens(&pe)))
}

pub fn oracle_ceiling() -> Check {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut p = runner::RunPlan::default_suite(BackendSpec::Oracle);
    p.output_dir = dir.path().to_path_buf();
    let out = run_plan(&p, RunControl::default()).map_err(|e| e.to_string())?;
    ensure(out.is_complete(), || format!("{} failures", out.failures.len()))?;
    ensure(!out.metrics.is_empty(), || "no metric rows".into())?;
    for m in &out.metrics {
        ensure(m.accuracy == Some(1.0) && m.parse_failure_count == 0, || {
            format!("{}/{}/{}/h{} accuracy {:?}, parse failures {}", m.task, m.model, m.kind, m.h, m.accuracy, m.parse_failure_count)
        })?;
    }
    let kinds: std::collections::BTreeSet<(String, QueryKind)> =
        out.metrics.iter().map(|m| (m.task.clone(), m.kind)).collect();
    ensure(kinds.len() == 5 + 5 + 4, || format!("expected 14 task/kind pairs, got {}", kinds.len()))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} rows, {} queries, all 1.0, {:.1}s",
        out.metrics.len(),
        out.total_queries,
        elapsed.as_secs_f64()
    ))
}

pub const RANDOM_MIN_QUERIES: usize = 3000;

/// Accuracy of the random backend on one task's next-action queries.
fn random_accuracy(task: &str, episodes: usize, max_steps: Option<usize>, mode: ActionMode) -> Result<(usize, f64), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut p = plan(
        vec![collect_ref(task, episodes, 11, max_steps)],
        BackendSpec::Random { seed: 5 },
        &[QueryKind::NextAction],
        &[4],
        dir.path(),
    );
    p.prompt_configs = vec![PromptConfig {
        action_mode: mode,
        ..PromptConfig::default()
    }];
    let out = run_plan(&p, RunControl::default()).map_err(|e| e.to_string())?;
    let [m] = out.metrics.as_slice() else {
        return Err(format!("expected one metric row, got {}", out.metrics.len()));
    };
    Ok((m.n_queries, m.accuracy.unwrap_or(f64::NAN)))
}

pub fn random_floor() -> Check {
    let started = Instant::now();
    let (n_mc, acc_mc) = random_accuracy("MountainCar", 40, None, ActionMode::Bins { n: 10 })?;
    let (n_pe, acc_pe) = random_accuracy("Pendulum", 16, None, ActionMode::Bins { n: 10 })?;
    ensure(n_mc >= RANDOM_MIN_QUERIES && n_pe >= RANDOM_MIN_QUERIES, || {
        format!("too few queries: {n_mc} discrete, {n_pe} binned")
    })?;
    ensure((0.300..=0.367).contains(&acc_mc), || format!("MountainCar accuracy {acc_mc:.4} outside [0.300, 0.367]"))?;
    ensure((0.075..=0.125).contains(&acc_pe), || format!("Pendulum bins accuracy {acc_pe:.4} outside [0.075, 0.125]"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("discrete {acc_mc:.4} over {n_mc}, bins {acc_pe:.4} over {n_pe}, {:.1}s", elapsed.as_secs_f64()))
}

/// Bin by linear scan over the edges, independent of the library.
pub fn brute_force_bin(x: f64, lo: f64, hi: f64, n: usize) -> usize {
    let x = x.max(lo).min(hi);
    let width = (hi - lo) / n as f64;
    let mut bin = 0;
    for k in 0..n {
        if x >= lo + k as f64 * width {
            bin = k;
        }
    }
    bin
}

pub fn quantization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let b = Bounds::new(-2.0, 2.0);
    let n = 10;
    let mut values: Vec<f64> = (0..10_000)
        .map(|k| match k % 10 {
            0 => rng.gen_range(-1e6..1e6),
            1 => parsing::bin_edge(&b, n, rng.gen_range(0..=n)),
            _ => rng.gen_range(-2.5..2.5),
        })
        .collect();
    values.extend([f64::MIN, f64::MAX, -0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY]);
    values.sort_by(f64::total_cmp);
    let mut prev = 0;
    for &v in &values {
        let bin = quantize(v, &b, n).map_err(|e| format!("quantize({v}) failed: {e}"))?;
        ensure(bin < n, || format!("quantize({v}) = {bin} out of range"))?;
        ensure(bin >= prev, || format!("not monotone at {v}"))?;
        prev = bin;
    }
    for i in 0..n {
        let e = parsing::bin_edge(&b, n, i);
        ensure(quantize(e, &b, n) == Ok(i), || format!("edge {i} ({e}) not in bin {i}"))?;
    }
    ensure(quantize(2.0, &b, n) == Ok(n - 1), || "upper bound not in last bin".into())?;
    ensure(quantize(-2.0, &b, n) == Ok(0), || "lower bound not in bin 0".into())?;

    // Absolute-mode scoring against a brute-force same-bin oracle.
    let task = tasks::pendulum();
    let ds = small_dataset(BuiltinEnv::Pendulum, 1, 0, Some(20));
    let base: EvalQuery = fixtures::queries(&ds, QueryKind::NextAction, 2).remove(0);
    let mut agree = 0;
    for _ in 0..1000 {
        let truth = rng.gen_range(-2.0..=2.0);
        let pred = if rng.gen_bool(0.3) { truth + rng.gen_range(-0.2..0.2) } else { rng.gen_range(-3.0..3.0) };
        let mut q = base.clone();
        q.truth = GroundTruth::Action {
            action: Action::Continuous(vec![truth]),
        };
        let got = score_answer(&q, &ParsedAnswer::AbsoluteAction(vec![pred]), &task, ActionMode::Absolute).correct;
        let want = brute_force_bin(pred, -2.0, 2.0, 10) == brute_force_bin(truth, -2.0, 2.0, 10);
        ensure(got == want, || format!("absolute scoring of {pred} vs {truth}: got {got}, oracle {want}"))?;
        agree += want as usize;
    }
    Ok(format!("{} values monotone and total, edges exact, 1000/1000 scoring pairs agree ({agree} same-bin)", values.len()))
}

pub const MIN_PARSER_FIXTURES: usize = 30;

/// Answers each request with one of a fixed list of texts, chosen by the
/// query id so the outcome does not depend on scheduling.
pub struct ScriptedBackend {
    pub texts: Vec<String>,
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let k = req.query_id.bytes().fold(0usize, |h, b| h.wrapping_mul(31).wrapping_add(b as usize));
        Ok(BackendResponse {
            text: self.texts[k % self.texts.len()].clone(),
            usage: None,
            latency_ms: 0,
            attempts: 1,
        })
    }
}

pub fn parser_corpus() -> Check {
    let corpus = fixtures::parser_corpus();
    ensure(corpus.len() >= MIN_PARSER_FIXTURES, || format!("only {} fixtures", corpus.len()))?;
    for case in &corpus {
        let got = std::panic::catch_unwind(|| parse_response(&case.text, case.kind, case.task(), case.mode))
            .map_err(|_| format!("{} panicked", case.name))?;
        ensure(got == case.expected, || format!("{}: got {got:?}, expected {:?}", case.name, case.expected))?;
    }

    // Feed the whole corpus through a run as model output.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = plan(
        vec![collect_ref("MountainCar", 1, 0, None), collect_ref("Pendulum", 1, 0, Some(50))],
        BackendSpec::Oracle,
        &QueryKind::CORE,
        &[2],
        dir.path(),
    );
    let backend: Box<dyn Backend> = Box::new(ScriptedBackend {
        texts: corpus.iter().map(|c| c.text.clone()).collect(),
    });
    let out = run_with(&p, &[backend], RunControl::default()).map_err(|e| format!("run aborted: {e}"))?;
    ensure(out.is_complete() && out.records.len() == out.total_queries, || "run did not complete".into())?;
    let failures: usize = out.metrics.iter().map(|m| m.parse_failure_count).sum();
    ensure(failures > 0, || "corpus produced no parse failures in the run".into())?;
    Ok(format!("{} fixtures match; run over {} queries completed with {failures} parse failures", corpus.len(), out.total_queries))
}

/// Transcript built from a random-backend run, so every prompt has an entry.
fn transcript_for(p: &runner::RunPlan, path: &std::path::Path) -> Result<usize, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut src = p.clone();
    src.backends = vec![BackendSpec::Random { seed: 3 }];
    src.output_dir = dir.path().to_path_buf();
    run_plan(&src, RunControl::default()).map_err(|e| e.to_string())?;
    let records = read_journal(dir.path());
    let mut text = String::new();
    for (k, r) in records.iter().enumerate() {
        let e = TranscriptEntry {
            fingerprint: r.prompt_fingerprint.clone(),
            query_id: r.query.query_id.clone(),
            model: "replayed-model".into(),
            response: r.raw_response.clone(),
            latency_ms: 100 + k as u64 % 37,
            usage: None,
        };
        text.push_str(&serde_json::to_string(&e).unwrap());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| e.to_string())?;
    Ok(records.len())
}

pub fn replay_determinism() -> Check {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let transcript = work.path().join("transcript.jsonl");
    let mut p = plan(
        vec![collect_ref("MountainCar", 2, 1, None), collect_ref("Pendulum", 1, 1, Some(50))],
        BackendSpec::Replay {
            transcript: transcript.clone(),
            name: None,
        },
        &QueryKind::CORE,
        &[1, 4],
        work.path(),
    );
    p.prompt_configs.push(PromptConfig {
        indexed_history: false,
        ..PromptConfig::default()
    });
    let n = transcript_for(&p, &transcript)?;
    let mut snaps = Vec::new();
    for run in ["a", "b"] {
        p.output_dir = work.path().join(run);
        p.workers = if run == "a" { 1 } else { 8 };
        let out = run_plan(&p, RunControl::default()).map_err(|e| e.to_string())?;
        ensure(out.is_complete(), || format!("run {run} incomplete: {} failures", out.failures.len()))?;
        ensure(out.records.iter().all(|r| r.model == "replayed-model"), || "model id not taken from transcript".into())?;
        let outputs: Vec<_> = snapshot(&p.output_dir)
            .into_iter()
            .filter(|(f, _)| f == runner::JOURNAL_FILE || f == runner::report::METRICS_FILE || f.starts_with(runner::report::SERIES_DIR))
            .collect();
        snaps.push(outputs);
    }
    let files: Vec<&str> = snaps[0].iter().map(|(p, _)| p.as_str()).collect();
    for want in [runner::JOURNAL_FILE, runner::report::METRICS_FILE] {
        ensure(files.contains(&want), || format!("{want} missing"))?;
    }
    ensure(files.iter().any(|f| f.starts_with("series")), || "no series files".into())?;
    ensure(snaps[0] == snaps[1], || {
        let differ: Vec<&str> = snaps[0]
            .iter()
            .zip(&snaps[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        format!("outputs differ: {differ:?}")
    })?;
    Ok(format!("{n} transcript entries; {} output files byte-identical across two runs", files.len()))
}

pub fn ablation_differencing() -> Check {
    let base = PromptConfig::default();
    let toggles: [(&str, PromptConfig, Option<&str>); 3] = [
        ("indexed_history", PromptConfig { indexed_history: false, ..base.clone() }, None),
        (
            "include_task_description",
            PromptConfig { include_task_description: false, ..base.clone() },
            Some("task_description"),
        ),
        ("include_dynamics", PromptConfig { include_dynamics: false, ..base.clone() }, Some("transition_dynamics")),
    ];
    let mut checked = 0;
    for env in BuiltinEnv::ALL {
        let task = env.spec();
        let ds = small_dataset(env, 1, 0, Some(40));
        for kind in QueryKind::ALL {
            if kind.supported_by(&task).is_err() {
                continue;
            }
            let q = fixtures::queries(&ds, kind, 4).remove(0);
            let full = render(&q, &task, &base).map_err(|e| e.to_string())?;
            let full_sections = system_sections(&task, &base).map_err(|e| e.to_string())?;
            for (name, cfg, section) in &toggles {
                let ablated = render(&q, &task, cfg).map_err(|e| e.to_string())?;
                let ctx = || format!("{} {kind} {name}", task.name);
                match section {
                    Some(slot) => {
                        ensure(ablated.user_text == full.user_text, || format!("{}: user text changed", ctx()))?;
                        let expected: Vec<_> = full_sections.iter().filter(|(s, _)| s != slot).cloned().collect();
                        let got = system_sections(&task, cfg).map_err(|e| e.to_string())?;
                        ensure(got == expected && got.len() + 1 == full_sections.len(), || {
                            format!("{}: system sections other than `{slot}` changed", ctx())
                        })?;
                    }
                    None => {
                        ensure(ablated.system_text == full.system_text, || format!("{}: system text changed", ctx()))?;
                        let (fh, fq) = split_user(&full.user_text);
                        let (ah, aq) = split_user(&ablated.user_text);
                        ensure(fh != ah, || format!("{}: history region unchanged", ctx()))?;
                        ensure(strip_history_indices(&fh) == ah, || format!("{}: history differs beyond step labels", ctx()))?;
                        let tail = |s: &str| s.split_once("\n\n").map(|(_, t)| t.to_string()).unwrap_or_default();
                        ensure(tail(&fq) == tail(&aq), || format!("{}: question differs after its first paragraph", ctx()))?;
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (task, kind, knob) diffs confined to their regions"))
}

/// Splits the user prompt into the history part and the question part.
pub fn split_user(user: &str) -> (String, String) {
    let marker = "\n\nYour task is to analyze";
    let at = user.find(marker).expect("user prompt has the task line");
    let rest = &user[at + marker.len()..];
    let q = rest.split_once(":\n").map(|(_, q)| q).unwrap_or(rest);
    (user[..at].to_string(), q.to_string())
}

/// Removes `s12 = ` style labels from history lines.
pub fn strip_history_indices(history: &str) -> String {
    let re = regex::Regex::new(r"(?m)^[sar]\d+ = ").unwrap();
    re.replace_all(history, "").into_owned()
}

pub fn agreement_pipeline() -> Check {
    let records = fixtures::agreement_records();
    let a = metrics::agreement(&records).map_err(|e| e.to_string())?;
    ensure(a.n == 50, || format!("n = {}", a.n))?;
    ensure(a.manual_accuracy == 20.0 / 50.0, || format!("manual {}", a.manual_accuracy))?;
    ensure(a.automatic_accuracy == 26.0 / 50.0, || format!("automatic {}", a.automatic_accuracy))?;
    ensure(a.agreement_rate == 40.0 / 50.0, || format!("agreement {}", a.agreement_rate))?;
    let hist = metrics::error_histogram(&fixtures::histogram_records());
    ensure(hist == fixtures::PUBLISHED_HISTOGRAM, || format!("histogram {hist:?}"))?;
    Ok(format!(
        "manual {:.2}, automatic {:.2}, agreement {:.2}; histogram {hist:?}",
        a.manual_accuracy, a.automatic_accuracy, a.agreement_rate
    ))
}

pub fn resumability() -> Check {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut p = plan(
        vec![collect_ref("MountainCar", 2, 4, None), collect_ref("Acrobot", 1, 4, None)],
        BackendSpec::Random { seed: 8 },
        &QueryKind::ALL,
        &[1, 4],
        &work.path().join("full"),
    );
    let full = run_plan(&p, RunControl::default()).map_err(|e| e.to_string())?;
    ensure(full.is_complete(), || "uninterrupted run incomplete".into())?;

    p.output_dir = work.path().join("resumed");
    let half = full.total_queries / 2;
    let first = run_plan(&p, RunControl { stop_after: Some(half) }).map_err(|e| e.to_string())?;
    ensure(first.interrupted && first.completed_now == half, || {
        format!("interrupted run wrote {} records", first.completed_now)
    })?;
    let second = run_plan(&p, RunControl::default()).map_err(|e| e.to_string())?;
    ensure(second.resumed == half && second.completed_now == full.total_queries - half, || {
        format!("resume redid work: resumed {}, new {}", second.resumed, second.completed_now)
    })?;

    let key_sorted = |mut v: Vec<mindprobe::domain::EvalRecord>| {
        v.sort_by_key(|r| r.key());
        v
    };
    let a = key_sorted(read_journal(&work.path().join("full")));
    let b = key_sorted(read_journal(&work.path().join("resumed")));
    ensure(a.len() == full.total_queries, || "journal size".into())?;
    ensure(a == b, || "record sets differ".into())?;
    let keys: std::collections::HashSet<String> = b.iter().map(|r| r.key()).collect();
    ensure(keys.len() == b.len(), || "duplicate journal keys".into())?;
    let metrics_a = std::fs::read(work.path().join("full").join(runner::report::METRICS_FILE)).map_err(|e| e.to_string())?;
    let metrics_b = std::fs::read(work.path().join("resumed").join(runner::report::METRICS_FILE)).map_err(|e| e.to_string())?;
    ensure(metrics_a == metrics_b, || "metrics tables differ".into())?;
    Ok(format!("stopped after {half}/{} and resumed; record sets identical", full.total_queries))
}

pub type Criterion = (&'static str, fn() -> Check);

pub const ALL: [Criterion; 10] = [
    ("1 dynamics oracle equivalence", dynamics_oracle),
    ("2 dataset shapes", dataset_shapes),
    ("3 oracle ceiling", oracle_ceiling),
    ("4 random floor", random_floor),
    ("5 quantization conformance", quantization),
    ("6 parser corpus", parser_corpus),
    ("7 replay determinism", replay_determinism),
    ("8 ablation differencing", ablation_differencing),
    ("9 agreement pipeline", agreement_pipeline),
    ("10 resumability", resumability),
];

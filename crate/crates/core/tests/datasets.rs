mod common;

use common::criteria;
use common::fixtures::small_dataset;
use mindprobe::dataset::{self, eligible_ts, Dataset, DatasetError, QueryOptions};
use mindprobe::domain::{Action, Episode, GroundTruth, QueryInputs, QueryKind, Step};
use mindprobe::envs::BuiltinEnv;
use mindprobe::tasks;
use proptest::prelude::*;

#[test]
fn collected_datasets_have_expected_shapes() {
    println!("{}", criteria::dataset_shapes().unwrap());
}

#[test]
fn collection_is_reproducible() {
    let a = small_dataset(BuiltinEnv::Acrobot, 2, 3, None);
    let b = small_dataset(BuiltinEnv::Acrobot, 2, 3, None);
    let c = small_dataset(BuiltinEnv::Acrobot, 2, 4, None);
    assert_eq!(a, b);
    assert_eq!(a.content_hash(), b.content_hash());
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn saved_files_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(BuiltinEnv::Pendulum, 2, 0, Some(50));
    let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ds.save(&p1).unwrap();
    Dataset::load(&p1).unwrap().save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(ds.manifest.content_hash.as_deref(), Some(ds.content_hash().as_str()));
}

#[test]
fn tampered_body_fails_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mc.jsonl");
    small_dataset(BuiltinEnv::MountainCar, 1, 0, None).save(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let tampered = text.replacen("\"reward\":-1.0", "\"reward\":-2.0", 1);
    assert_ne!(text, tampered);
    std::fs::write(&p, tampered).unwrap();
    match Dataset::load(&p) {
        Err(DatasetError::Format { line: 1, reason }) => assert!(reason.contains("hash")),
        other => panic!("{other:?}"),
    }
}

fn lander_episode(id: usize, len: usize, bad_action_at: Option<usize>) -> Episode {
    Episode {
        id,
        task: "LunarLander".into(),
        steps: (0..len)
            .map(|t| Step {
                t,
                state: (0..8).map(|k| if k < 6 { (t * 8 + k) as f64 * 0.01 } else { (t % 2) as f64 }).collect(),
                action: Action::Discrete(if Some(t) == bad_action_at { 9 } else { t % 4 }),
                reward: -0.5,
            })
            .collect(),
        terminal_state: Some(vec![0.0; 8]),
        terminated: true,
        seed: 0,
    }
}

#[test]
fn ingests_external_task_without_simulator() {
    let task = tasks::lookup("LunarLander").unwrap().clone();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lander.jsonl");
    Dataset::from_episodes(task.clone(), "recorded", vec![lander_episode(0, 30, None), lander_episode(1, 25, None)])
        .save(&p)
        .unwrap();
    let ds = dataset::ingest_external(&p, &task).unwrap();
    assert_eq!(ds.episodes.len(), 2);
    assert_eq!(ds.total_steps(), 55);
    let qs = dataset::enumerate_queries(&ds, QueryKind::NextState, &QueryOptions::new(4)).unwrap();
    assert_eq!(qs.len(), (30 - 3 - 4 + 1) + (25 - 3 - 4 + 1));
}

#[test]
fn ingest_reports_every_violation() {
    let task = tasks::lookup("LunarLander").unwrap().clone();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lander.jsonl");
    Dataset::from_episodes(task.clone(), "recorded", vec![lander_episode(0, 10, Some(3)), lander_episode(1, 10, Some(7))])
        .save(&p)
        .unwrap();
    match dataset::ingest_external(&p, &task) {
        Err(DatasetError::Validation(v)) => {
            assert_eq!(v.len(), 2, "{v:?}");
            assert!(v[0].starts_with("episode 0") && v[1].starts_with("episode 1"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn continuous_tasks_have_no_judge_queries() {
    let ds = small_dataset(BuiltinEnv::Pendulum, 1, 0, Some(50));
    assert!(matches!(
        dataset::enumerate_queries(&ds, QueryKind::JudgeNextAction, &QueryOptions::new(2)),
        Err(DatasetError::Unsupported(_))
    ));
}

#[test]
fn limit_spreads_over_the_dataset() {
    let ds = small_dataset(BuiltinEnv::MountainCar, 3, 0, None);
    let all = dataset::enumerate_queries(&ds, QueryKind::NextAction, &QueryOptions::new(4)).unwrap();
    let opts = QueryOptions {
        limit: Some(10),
        ..QueryOptions::new(4)
    };
    let some = dataset::enumerate_queries(&ds, QueryKind::NextAction, &opts).unwrap();
    assert_eq!(some.len(), 10);
    assert_eq!(some[0], all[0]);
    assert!(some.iter().all(|q| all.contains(q)));
    let episodes: std::collections::BTreeSet<usize> = some.iter().map(|q| q.episode_id).collect();
    assert_eq!(episodes.len(), 3);
}

#[test]
fn judge_proposals_mix_truth_and_decoys() {
    let ds = small_dataset(BuiltinEnv::MountainCar, 5, 0, None);
    let qs = dataset::enumerate_queries(&ds, QueryKind::JudgeNextAction, &QueryOptions::new(4)).unwrap();
    let truthful = qs
        .iter()
        .filter(|q| matches!(q.truth, GroundTruth::Judgment { proposal_is_truth: true, .. }))
        .count();
    let frac = truthful as f64 / qs.len() as f64;
    assert!((0.4..0.6).contains(&frac), "{frac}");
    for q in &qs {
        let (QueryInputs::JudgeNextAction { proposed_action, .. }, GroundTruth::Judgment { proposal_is_truth, true_action }) =
            (&q.inputs, &q.truth)
        else {
            panic!()
        };
        assert_eq!(*proposal_is_truth, proposed_action == true_action);
    }
}

proptest! {
    #[test]
    fn warm_up_and_lookahead_hold(len in 0usize..60, h in 1usize..20, stride in 1usize..4, k in 0usize..5) {
        let kind = QueryKind::ALL[k];
        let ts = eligible_ts(len, kind, h, stride);
        for &t in &ts {
            prop_assert!(t >= h);
            prop_assert!(t + kind.lookahead() < len);
        }
        if stride == 1 {
            let expected = (len as i64 - 1 - kind.lookahead() as i64 - h as i64 + 1).max(0) as usize;
            prop_assert_eq!(ts.len(), expected);
        }
    }

    #[test]
    fn queries_read_the_right_steps(seed in 0u64..20, h in 1usize..9, k in 0usize..5) {
        let kind = QueryKind::ALL[k];
        let ds = small_dataset(BuiltinEnv::MountainCar, 1, seed, Some(60));
        let ep = &ds.episodes[0];
        for q in dataset::enumerate_queries(&ds, kind, &QueryOptions::new(h)).unwrap() {
            let i = q.inputs.index();
            let t = i - 1;
            prop_assert_eq!(q.window.steps.len(), h);
            prop_assert_eq!(q.window.steps.last().unwrap().t, t);
            prop_assert!(q.window.steps.iter().all(|s| s.t <= t));
            match (&q.inputs, &q.truth) {
                (QueryInputs::NextAction { state, .. }, GroundTruth::Action { action }) => {
                    prop_assert_eq!(state, &ep.steps[i].state);
                    prop_assert_eq!(action, &ep.steps[i].action);
                }
                (QueryInputs::LastAction { state, next_state, .. }, GroundTruth::Action { action }) => {
                    prop_assert_eq!(state, &ep.steps[i].state);
                    prop_assert_eq!(next_state, &ep.steps[i + 1].state);
                    prop_assert_eq!(action, &ep.steps[i].action);
                }
                (QueryInputs::NextState { state, .. }, GroundTruth::StateChange { before, after, .. }) => {
                    prop_assert_eq!(state, before);
                    prop_assert_eq!(after, &ep.steps[i + 1].state);
                }
                (QueryInputs::LastState { next_state, .. }, GroundTruth::StateChange { before, after, .. }) => {
                    prop_assert_eq!(before, &ep.steps[t].state);
                    prop_assert_eq!(after, &ep.steps[i].state);
                    prop_assert_eq!(next_state, &ep.steps[i + 1].state);
                }
                (QueryInputs::JudgeNextAction { state, .. }, GroundTruth::Judgment { true_action, .. }) => {
                    prop_assert_eq!(state, &ep.steps[i].state);
                    prop_assert_eq!(true_action, &ep.steps[i].action);
                }
                _ => prop_assert!(false, "inputs and truth disagree"),
            }
        }
    }
}

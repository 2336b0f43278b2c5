mod common;

use std::sync::Arc;

use common::*;
use pilot_core::agent::{EpisodeRunner, GroundingActor, NoMemory, ReferencePlanner};
use pilot_core::env::{Difficulty, ElementId, GoalCondition, Page, Task, World, WorldSpec};
use pilot_core::memory::ScriptedSummarizer;
use pilot_core::pipeline::*;
use pilot_core::port::PortError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn home_candidates(spec: &WorldSpec, k: usize) -> Vec<TaskCandidate> {
    let (c, warnings) = propose_tasks(spec, "home", &ScriptedProposer::for_world(spec), k).unwrap();
    assert!(warnings.is_empty());
    c
}

fn impossible(id: &str, goal: GoalCondition, plan: &str) -> TaskCandidate {
    TaskCandidate::new(Task {
        task_id: id.into(),
        instruction: format!("impossible {id}"),
        goal: vec![goal],
        domain_tag: "shopping".into(),
        difficulty: Difficulty::Hard,
        reference_plan: vec![plan.into()],
    })
}

fn mixed_fixture(spec: &WorldSpec) -> Vec<TaskCandidate> {
    let mut c = home_candidates(spec, 7);
    c.push(impossible(
        "bad-select",
        GoalCondition::ElementValueEquals { element_id: ElementId(5), text: "Klingon".into() },
        "select Klingon in Language",
    ));
    c.push(impossible(
        "bad-static",
        GoalCondition::ElementValueEquals { element_id: ElementId(6), text: "free".into() },
        "type free into Free shipping over $50",
    ));
    c.push(impossible(
        "bad-answer",
        GoalCondition::AnswerMatches("^never$".into()),
        "answer sometimes",
    ));
    c
}

#[test]
fn scripted_proposer_fills_the_request() {
    let spec = world("synthshop");
    let c = home_candidates(&spec, 10);
    assert_eq!(c.len(), 10);
    for (i, cand) in c.iter().enumerate() {
        assert_eq!(cand.task.task_id, format!("home-{:02}", i + 1));
        spec.check_task_refs(&cand.task).unwrap();
    }
    assert!(home_candidates(&spec, 0).is_empty());
    assert!(matches!(
        propose_tasks(&spec, "attic", &ScriptedProposer::for_world(&spec), 3),
        Err(PipelineError::UnknownPage(_))
    ));
}

struct Canned(String);

impl ProposerPort for Canned {
    fn propose(&self, _page: &Page, _context: &str, _k: usize) -> Result<String, PortError> {
        Ok(self.0.clone())
    }
}

#[test]
fn garbage_lines_become_warnings() {
    let spec = world("synthshop");
    let good = r#"{"instruction":"click Help","goal":[{"element_clicked":7}],"difficulty":"trivial"}"#;
    let mut lines: Vec<String> = (0..7).map(|_| good.to_string()).collect();
    lines.insert(2, "not json".into());
    lines.insert(5, r#"{"instruction":"no goal"}"#.into());
    lines.push(r#"{"instruction":"  ","goal":[]}"#.into());
    let (c, warnings) = propose_tasks(&spec, "home", &Canned(lines.join("\n")), 10).unwrap();
    assert_eq!((c.len(), warnings.len()), (7, 3));
    assert_eq!(c[0].difficulty_label, "trivial");
    assert_eq!(c[0].task.difficulty, Difficulty::Medium);
    assert_eq!(c[0].task.domain_tag, "shopping");
}

#[test]
fn filter_drops_exactly_the_impossible_tasks() {
    let spec = world("synthshop");
    let candidates = mixed_fixture(&spec);
    assert_eq!(candidates.len(), 10);
    let (kept, report) = filter_tasks(&candidates, &spec, &ScriptedRolloutAgent::default(), 6, 1).unwrap();
    assert_eq!(report.proposed, 10);
    assert_eq!(report.kept, kept.len());
    assert_eq!(kept.len(), 7);
    assert!(kept.iter().all(|c| !c.task.task_id.starts_with("bad-")));
    assert!(kept.iter().all(|c| c.rollout_total == 6 && c.rollout_successes == 6));
    assert!(matches!(
        filter_tasks(&candidates, &spec, &ScriptedRolloutAgent::default(), 0, 1),
        Err(PipelineError::Config(_))
    ));
}

struct Bernoulli(f64);

impl RolloutAgent for Bernoulli {
    fn rollout(&self, _spec: &Arc<WorldSpec>, _task: &Task, seed: u64) -> Result<bool, String> {
        Ok(ChaCha8Rng::seed_from_u64(seed).gen_bool(self.0))
    }
}

struct Panicky;

impl RolloutAgent for Panicky {
    fn rollout(&self, _spec: &Arc<WorldSpec>, task: &Task, _seed: u64) -> Result<bool, String> {
        if task.task_id.ends_with('1') {
            panic!("agent crashed");
        }
        Err("refused".into())
    }
}

#[test]
fn filter_rates_and_monotonicity() {
    let spec = world("synthshop");
    let candidates = home_candidates(&spec, 10);
    for p in [1.0 / 6.0, 0.5, 1.0] {
        let agent = Bernoulli(p);
        let (small, _) = filter_tasks(&candidates, &spec, &agent, 3, 9).unwrap();
        let (big, report) = filter_tasks(&candidates, &spec, &agent, 6, 9).unwrap();
        for r in &report.rates {
            assert_eq!(r.kept, r.successes > 0);
            assert!((r.rate - r.successes as f64 / 6.0).abs() < 1e-12);
        }
        let big_ids: Vec<_> = big.iter().map(|c| &c.task.task_id).collect();
        assert!(small.iter().all(|c| big_ids.contains(&&c.task.task_id)));
        let (again, _) = filter_tasks(&candidates, &spec, &agent, 6, 9).unwrap();
        assert_eq!(again, big);
        if p == 1.0 {
            assert_eq!(big.len(), 10);
        }
    }
    let (kept, report) = filter_tasks(&candidates, &spec, &Panicky, 2, 0).unwrap();
    assert!(kept.is_empty());
    assert_eq!(report.kept, 0);
}

#[test]
fn quality_list_admits_and_denies() {
    let list = QualityList::parse("# reviewed\nallow home-01\nallow home-02\ndeny home-02  # broken\n").unwrap();
    let spec = world("synthshop");
    let kept = apply_quality_list(home_candidates(&spec, 5), &list);
    assert_eq!(kept.iter().map(|c| c.task.task_id.as_str()).collect::<Vec<_>>(), vec!["home-01"]);
    assert!(QualityList::parse("home-03").is_err());
}

#[test]
fn jsonl_round_trips_and_reports_bad_lines() {
    let spec = world("synthshop");
    let dir = tempfile::tempdir().unwrap();
    let trajs: Vec<_> = spec
        .tasks
        .iter()
        .map(|task| {
            let mut w = World::new(Arc::clone(&spec), 0);
            EpisodeRunner::default()
                .run(&mut w, task, &mut ReferencePlanner, &mut GroundingActor, &mut NoMemory::default())
                .unwrap()
        })
        .collect();
    let path = dir.path().join("t.jsonl");
    save_trajectories(&trajs, &path).unwrap();
    assert_eq!(load_trajectories(&path).unwrap(), trajs);

    let tpath = dir.path().join("tasks.jsonl");
    save_tasks(&spec.tasks, &tpath).unwrap();
    assert_eq!(load_tasks(&tpath).unwrap(), spec.tasks);

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() - 40]).unwrap();
    let err = load_trajectories(&path).unwrap_err();
    match &err {
        PipelineError::Line { line, .. } => assert_eq!(*line, trajs.len()),
        other => panic!("{other:?}"),
    }
    assert!(err.to_string().contains(&format!(":{}:", trajs.len())));

    let (kept, report) = filter_tasks(&mixed_fixture(&spec), &spec, &ScriptedRolloutAgent::default(), 2, 0).unwrap();
    let rpath = dir.path().join("report.jsonl");
    report.save(&rpath).unwrap();
    assert_eq!(FilterReport::load(&rpath).unwrap(), report);
    assert_eq!(kept.len(), report.kept);

    let (bank, skipped) = build_bank(&trajs, &ScriptedSummarizer, 64).unwrap();
    assert_eq!(bank.len() + skipped, trajs.len());
}

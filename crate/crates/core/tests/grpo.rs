mod common;

use std::sync::Arc;

use common::*;
use pilot_core::grpo::*;
use pilot_core::judge::ScriptedJudge;
use pilot_core::memory::{ingest, MemoryBank, MemoryManager, ScriptedGate, ScriptedSummarizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn advantage_fixtures() {
    let a = normalize_advantages(&[5.0, 1.0, 1.0, 1.0]).unwrap();
    let r3 = 3f64.sqrt();
    let expected = [r3, -1.0 / r3, -1.0 / r3, -1.0 / r3];
    for (x, e) in a.iter().zip(expected) {
        assert!((x - e).abs() < 1e-12);
    }
    assert_eq!(normalize_advantages(&[1.0, 5.0]).unwrap(), vec![-1.0, 1.0]);
    assert_eq!(normalize_advantages(&[3.0; 4]).unwrap(), vec![0.0; 4]);
    assert!(matches!(normalize_advantages(&[3.0]), Err(GrpoError::GroupTooSmall(1))));
    let s = normalize_advantages_with(&[1.0, 5.0], StdKind::Sample).unwrap();
    assert!((s[1] - 2.0 / 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn advantages_have_zero_mean_unit_std() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let g = rng.gen_range(2..=16);
        let r: Vec<f64> = (0..g).map(|_| [1.0, 3.0, 5.0][rng.gen_range(0..3)]).collect();
        let a = normalize_advantages(&r).unwrap();
        if a.iter().all(|x| *x == 0.0) {
            continue;
        }
        let mean = a.iter().sum::<f64>() / g as f64;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g as f64).sqrt();
        assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ratio_fixtures_and_clamp() {
    assert_eq!(importance_ratio(-0.7, -0.7), 1.0);
    assert!((importance_ratio(2f64.ln(), 0.0) - 2.0).abs() < 1e-12);
    assert!((importance_ratio(-1.2, -1.5) - 0.3f64.exp()).abs() < 1e-12);
    assert!((importance_ratio(-1.2, -1.5) - 1.3498588).abs() < 1e-7);
    assert_eq!(ratio_with_flag(100.0, 0.0), (RATIO_MAX, true));
    assert_eq!(ratio_with_flag(-100.0, 0.0), (RATIO_MIN, true));
}

#[test]
fn kl_fixture_and_laws() {
    let p = [0.75f64.ln(), 0.25f64.ln()];
    let q = [0.5f64.ln(), 0.5f64.ln()];
    let oracle = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
    let kl = categorical_kl(&p, &q);
    assert!((kl - oracle).abs() < 1e-15);
    assert!((kl - 0.1308120).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let a = random_policy(&mut rng, 4, 3.0);
        let b = random_policy(&mut rng, 4, 3.0);
        let ctx = random_context(&mut rng, &a);
        assert!(kl_divergence(&a, &a, &ctx).unwrap().abs() < 1e-12);
        assert!(kl_divergence(&a, &b, &ctx).unwrap() >= -1e-12);
    }
    let three = random_policy(&mut rng, 3, 1.0);
    let ctx = random_context(&mut rng, &three);
    assert!(matches!(
        kl_divergence(&three, &random_policy(&mut rng, 4, 1.0), &ctx),
        Err(GrpoError::TemplateMismatch)
    ));
}

#[test]
fn gradient_matches_finite_differences() {
    let spec = world("plansuite");
    let task = &spec.tasks[0];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let old = random_policy(&mut rng, 3, 1.0);
        let mut policy = old.clone();
        for w in &mut policy.logits {
            *w += rng.gen_range(-0.3..0.3);
        }
        let reference = random_policy(&mut rng, 3, 1.0);
        let groups = vec![random_group(&mut rng, &old, task, 8), random_group(&mut rng, &old, task, 8)];
        let cfg = ObjectiveConfig {
            kl_coeff: rng.gen_range(0.0..0.5),
            clip: None,
            weighting: if i % 2 == 0 { Weighting::PerStep } else { Weighting::PerTrajectory },
        };
        worst = worst.max(max_gradient_error(&groups, &policy, &reference, &cfg, 1e-5));
    }
    assert!(worst < 1e-5, "max relative error {worst}");
}

#[test]
fn degenerate_objectives() {
    let spec = world("plansuite");
    let task = &spec.tasks[0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let single = random_policy(&mut rng, 1, 1.0);
    let groups = vec![random_group(&mut rng, &single, task, 8)];
    let v = grpo_objective(&groups, &single, &single, &ObjectiveConfig::default()).unwrap();
    assert!(v.gradient.iter().all(|g| *g == 0.0));

    let p = random_policy(&mut rng, 3, 1.0);
    let mut group = random_group(&mut rng, &p, task, 8);
    for r in &mut group.records {
        r.truncate(1);
    }
    let cfg = ObjectiveConfig { kl_coeff: 0.0, ..Default::default() };
    let v = grpo_objective(&[group.clone()], &p, &p, &cfg).unwrap();
    assert!(v.objective.abs() < 1e-12, "{}", v.objective);

    group.advantages.clear();
    assert!(matches!(
        grpo_objective(&[group], &p, &p, &cfg),
        Err(GrpoError::NotNormalized)
    ));
}

#[test]
fn update_rules() {
    let spec = world("plansuite");
    let task = &spec.tasks[0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_policy(&mut rng, 3, 1.0);
    let zero = vec![0.0; p.logits.len()];
    assert_eq!(update_policy(&p, &zero, 0.5).unwrap(), p);
    let g: Vec<f64> = (0..p.logits.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    assert_eq!(update_policy(&p, &g, 0.0).unwrap(), p);
    assert!(matches!(update_policy(&p, &g[1..], 0.1), Err(GrpoError::Shape { .. })));

    for _ in 0..20 {
        let old = random_policy(&mut rng, 3, 1.0);
        let groups = vec![random_group(&mut rng, &old, task, 8)];
        let cfg = ObjectiveConfig::default();
        let before = grpo_objective(&groups, &old, &old, &cfg).unwrap();
        let next = update_policy(&old, &before.gradient, 1e-3).unwrap();
        let after = grpo_objective(&groups, &next, &old, &cfg).unwrap();
        assert!(after.objective >= before.objective - 1e-12);
    }
}

fn quick_config(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        learning_rate: 0.5,
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn zero_iterations_leave_the_policy_alone() {
    let spec = world("plansuite");
    let out = train_planner(Arc::clone(&spec), &spec.tasks, quick_config(0)).unwrap();
    assert!(out.report.iterations.is_empty());
    assert_eq!(out.policy, PolicyParams::for_world(&spec, 0.5).unwrap());
    assert!(matches!(
        train_planner(Arc::clone(&spec), &[], quick_config(1)),
        Err(GrpoError::EmptyTasks)
    ));
}

#[test]
fn training_is_reproducible() {
    let spec = world("plansuite");
    let a = train_planner(Arc::clone(&spec), &spec.tasks, quick_config(5)).unwrap();
    let b = train_planner(Arc::clone(&spec), &spec.tasks, quick_config(5)).unwrap();
    assert_eq!(a.report.to_jsonl(), b.report.to_jsonl());
    assert_eq!(a.policy, b.policy);
    assert_eq!(TrainReport::from_jsonl(&a.report.to_jsonl()).unwrap(), a.report);
    assert_eq!(PolicyParams::from_json(&a.policy.to_json()).unwrap(), a.policy);
}

#[test]
fn groups_broadcast_one_reward_per_trajectory() {
    let spec = world("plansuite");
    let policy = Arc::new(PolicyParams::for_world(&spec, 0.5).unwrap());
    let cfg = CollectConfig::default();
    for task in &spec.tasks {
        let g = collect_group(&spec, task, &policy, &ScriptedRoles::default(), &ScriptedJudge, &cfg, 3).unwrap();
        assert_eq!(g.trajectories.len(), 8);
        for (recs, r) in g.records.iter().zip(&g.rewards) {
            assert!(!recs.is_empty());
            assert!(recs.iter().all(|x| x.reward == *r && x.template == recs[0].template));
            assert!([1.0, 3.0, 5.0].contains(r));
        }
    }

    let forced = Arc::new({
        let mut p = PolicyParams::for_world(&spec, 0.5).unwrap();
        let t = p.n_templates();
        p.logits.iter_mut().step_by(t).for_each(|w| *w = 50.0);
        p
    });
    let g = collect_group(&spec, &spec.tasks[0], &forced, &ScriptedRoles::default(), &ScriptedJudge, &cfg, 3).unwrap();
    let first = serde_json::to_string(&g.trajectories[0]).unwrap();
    assert!(g.trajectories.iter().all(|t| serde_json::to_string(t).unwrap() == first));
}

#[test]
fn training_leaves_the_memory_bank_untouched() {
    let spec = world("plansuite");
    let mut bank = MemoryBank::new(64);
    let solved = evaluate_trajectories(&spec);
    for t in &solved {
        ingest(&mut bank, t, &ScriptedSummarizer).unwrap();
    }
    let shared = bank.shared();
    let before = serde_json::to_string(&*shared.read()).unwrap();
    let roles = ScriptedRoles {
        memory: Some(MemoryManager::new(Arc::clone(&shared), Arc::new(ScriptedGate::new(Arc::clone(&spec))))),
    };
    let trainer = Trainer {
        spec: Arc::clone(&spec),
        roles: Arc::new(roles),
        judge: Arc::new(ScriptedJudge),
        config: quick_config(3),
    };
    trainer.train(&spec.tasks, PolicyParams::for_world(&spec, 0.5).unwrap()).unwrap();
    assert_eq!(serde_json::to_string(&*shared.read()).unwrap(), before);
}

fn evaluate_trajectories(spec: &Arc<pilot_core::env::WorldSpec>) -> Vec<pilot_core::agent::Trajectory> {
    use pilot_core::agent::{EpisodeRunner, GroundingActor, NoMemory, ReferencePlanner};
    spec.tasks
        .iter()
        .take(3)
        .map(|task| {
            let mut w = pilot_core::env::World::new(Arc::clone(spec), 0);
            let t = EpisodeRunner::default()
                .run(&mut w, task, &mut ReferencePlanner, &mut GroundingActor, &mut NoMemory::default())
                .unwrap();
            assert!(t.success, "{}", task.task_id);
            t
        })
        .collect()
}

//! Fixture builders shared by integration test targets.
#![allow(dead_code)]

use std::sync::Arc;

use pilot_core::env::{PlanTemplate, Task, WorldSpec};
use pilot_core::fixtures::builtin_world;
use pilot_core::grpo::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn world(name: &str) -> Arc<WorldSpec> {
    builtin_world(name).unwrap().unwrap()
}

pub fn templates(n: usize) -> Vec<PlanTemplate> {
    (0..n)
        .map(|i| PlanTemplate {
            name: format!("t{i}"),
            plan: vec![format!("1. step {i}")],
            schedule: vec![format!("step {i}")],
        })
        .collect()
}

pub fn random_policy(rng: &mut ChaCha8Rng, n_templates: usize, scale: f64) -> PolicyParams {
    let mut p = PolicyParams::uniform(templates(n_templates), vec!["a".into(), "b".into()], 4, 0.5).unwrap();
    for w in &mut p.logits {
        *w = rng.gen_range(-scale..scale);
    }
    p
}

pub fn random_context(rng: &mut ChaCha8Rng, p: &PolicyParams) -> PolicyContext {
    let domain = rng.gen_range(0..=p.domains.len());
    let bucket = rng.gen_range(0..p.memory_buckets);
    PolicyContext {
        features: vec![0, 1 + domain, 2 + p.domains.len() + bucket],
    }
}

/// One normalized group of `g` trajectories with 1..=4 planning steps each.
/// Records are sampled under `old`, rewards drawn from the rubric.
pub fn random_group(rng: &mut ChaCha8Rng, old: &PolicyParams, task: &Task, g: usize) -> RolloutGroup {
    let mut rewards = Vec::with_capacity(g);
    let mut records = Vec::with_capacity(g);
    for _ in 0..g {
        let reward = [1.0, 3.0, 5.0][rng.gen_range(0..3)];
        let first = random_context(rng, old);
        let template = old.sample(&first, rng);
        let steps = rng.gen_range(1..=4);
        let recs = (0..steps)
            .map(|step_index| {
                let context = if step_index == 0 { first.clone() } else { random_context(rng, old) };
                PlanningRecord {
                    step_index,
                    old_logprob: old.log_prob(&context, template),
                    context,
                    template,
                    reward,
                }
            })
            .collect();
        rewards.push(reward);
        records.push(recs);
    }
    let mut group = RolloutGroup {
        task: task.clone(),
        trajectories: Vec::new(),
        judgements: Vec::new(),
        rewards,
        records,
        advantages: Vec::new(),
    };
    group.normalize(StdKind::Population).unwrap();
    group
}

/// Largest per-coordinate relative error between the analytic gradient and
/// central finite differences. The denominator is floored so coordinates
/// whose true derivative is zero are compared absolutely.
pub fn max_gradient_error(
    groups: &[RolloutGroup],
    policy: &PolicyParams,
    reference: &PolicyParams,
    cfg: &ObjectiveConfig,
    h: f64,
) -> f64 {
    let analytic = grpo_objective(groups, policy, reference, cfg).unwrap().gradient;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = policy.clone();
        plus.logits[i] += h;
        let mut minus = policy.clone();
        minus.logits[i] -= h;
        let fp = grpo_objective(groups, &plus, reference, cfg).unwrap().objective;
        let fm = grpo_objective(groups, &minus, reference, cfg).unwrap().objective;
        let fd = (fp - fm) / (2.0 * h);
        let denom = a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max((a - fd).abs() / denom);
    }
    worst
}

/// Lower median for ties, strict mode otherwise; written independently of
/// the library's aggregation.
pub fn vote_oracle(votes: &[u8]) -> (u8, bool) {
    let mut best: Vec<u8> = Vec::new();
    let mut best_n = 0;
    for level in [1u8, 3, 5] {
        let n = votes.iter().filter(|&&v| v == level).count();
        if n > best_n {
            best = vec![level];
            best_n = n;
        } else if n == best_n {
            best.push(level);
        }
    }
    if best.len() == 1 {
        (best[0], false)
    } else {
        let mut s = votes.to_vec();
        s.sort();
        (s[(s.len() - 1) / 2], true)
    }
}

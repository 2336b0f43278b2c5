use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeLimits, EpisodeRunner, FrozenClock};
use crate::client::PromptLibrary;
use crate::env::{Task, World, WorldSpec};
use crate::judge::{JudgePort, ScriptedJudge};
use crate::seed::derive_seed;

use super::group::{collect_group, CollectConfig, FrozenRoles, RolloutGroup, ScriptedRoles};
use super::objective::{grpo_objective, l2_norm, update_policy, ObjectiveConfig, StdKind, Weighting};
use super::policy::{PolicyParams, PolicyPlanner, DEFAULT_TEMPERATURE};
use super::GrpoError;

/// Learning rate used for LLM-scale planner training; kept for reference.
/// The template policy trains with `TrainConfig::learning_rate`.
pub const REFERENCE_LLM_LEARNING_RATE: f64 = 2e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub group_size: usize,
    pub batch_tasks: usize,
    pub kl_coeff: f64,
    pub learning_rate: f64,
    pub temperature: f64,
    pub iterations: usize,
    /// Snapshot the reference policy every this many iterations; 0 keeps
    /// the initial policy as reference throughout.
    pub ref_refresh_every: usize,
    /// Gradient steps per collected batch.
    pub epochs: usize,
    pub judge_votes: usize,
    pub std_kind: StdKind,
    pub clip: Option<f64>,
    pub weighting: Weighting,
    pub limits: EpisodeLimits,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            group_size: 8,
            batch_tasks: 6,
            kl_coeff: 0.1,
            learning_rate: 0.05,
            temperature: DEFAULT_TEMPERATURE,
            iterations: 100,
            ref_refresh_every: 0,
            epochs: 1,
            judge_votes: crate::judge::DEFAULT_VOTES,
            std_kind: StdKind::Population,
            clip: None,
            weighting: Weighting::PerStep,
            limits: EpisodeLimits::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall(self.group_size));
        }
        if self.kl_coeff < 0.0 || !self.kl_coeff.is_finite() {
            return Err(GrpoError::Config(format!("kl_coeff must be >= 0, got {}", self.kl_coeff)));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(GrpoError::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if self.batch_tasks == 0 || self.epochs == 0 || self.judge_votes == 0 {
            return Err(GrpoError::Config("batch_tasks, epochs and judge_votes must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() {
            return Err(GrpoError::Config("learning_rate must be finite".into()));
        }
        Ok(())
    }

    fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            kl_coeff: self.kl_coeff,
            clip: self.clip,
            weighting: self.weighting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub tasks: Vec<String>,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub mean_kl: f64,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: Vec<IterationStats>,
}

impl TrainReport {
    pub fn to_jsonl(&self) -> String {
        self.iterations
            .iter()
            .map(|s| serde_json::to_string(s).expect("stats serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GrpoError> {
        let mut iterations = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            iterations.push(serde_json::from_str(line).map_err(|e| GrpoError::Format {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(TrainReport { iterations })
    }

    pub fn success_curve(&self) -> Vec<f64> {
        self.iterations.iter().map(|s| s.success_rate).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub report: TrainReport,
}

/// Planner-only trainer; the actor, memory and judge are held fixed.
pub struct Trainer {
    pub spec: Arc<WorldSpec>,
    pub roles: Arc<dyn FrozenRoles>,
    pub judge: Arc<dyn JudgePort>,
    pub config: TrainConfig,
}

impl Trainer {
    pub fn scripted(spec: Arc<WorldSpec>, config: TrainConfig) -> Self {
        Trainer {
            spec,
            roles: Arc::new(ScriptedRoles::default()),
            judge: Arc::new(ScriptedJudge),
            config,
        }
    }

    fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            group_size: self.config.group_size,
            judge_votes: self.config.judge_votes,
            limits: self.config.limits,
        }
    }

    /// Collects one batch of groups under `policy` without updating it.
    pub fn collect_batch(
        &self,
        tasks: &[Task],
        policy: &Arc<PolicyParams>,
        iteration: usize,
        task_indices: &[usize],
    ) -> Result<Vec<RolloutGroup>, GrpoError> {
        let cfg = self.collect_config();
        task_indices
            .par_iter()
            .map(|&ti| {
                collect_group(
                    &self.spec,
                    &tasks[ti],
                    policy,
                    self.roles.as_ref(),
                    self.judge.as_ref(),
                    &cfg,
                    derive_seed(&[self.config.seed, iteration as u64, ti as u64]),
                )
            })
            .collect()
    }

    pub fn train(&self, tasks: &[Task], initial: PolicyParams) -> Result<TrainOutcome, GrpoError> {
        self.config.validate()?;
        if tasks.is_empty() {
            return Err(GrpoError::EmptyTasks);
        }
        initial.check()?;
        let obj_cfg = self.config.objective();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut policy = initial;
        let mut reference = policy.clone();
        let mut report = TrainReport::default();
        let batch = self.config.batch_tasks.min(tasks.len());

        for it in 0..self.config.iterations {
            if self.config.ref_refresh_every > 0 && it > 0 && it % self.config.ref_refresh_every == 0 {
                reference = policy.clone();
            }
            let mut chosen = sample(&mut rng, tasks.len(), batch).into_vec();
            chosen.sort_unstable();
            let old = Arc::new(policy.clone());
            let mut groups = self.collect_batch(tasks, &old, it, &chosen)?;
            for g in &mut groups {
                g.normalize(self.config.std_kind)?;
            }

            let mut first = None;
            for _ in 0..self.config.epochs {
                let value = grpo_objective(&groups, &policy, &reference, &obj_cfg)?;
                policy = update_policy(&policy, &value.gradient, self.config.learning_rate)?;
                first.get_or_insert(value);
            }
            let value = first.expect("at least one epoch");

            let n: usize = groups.iter().map(|g| g.rewards.len()).sum();
            let reward_sum: f64 = groups.iter().flat_map(|g| &g.rewards).sum();
            let successes: usize = groups.iter().map(RolloutGroup::success_count).sum();
            report.iterations.push(IterationStats {
                iteration: it,
                tasks: chosen.iter().map(|&i| tasks[i].task_id.clone()).collect(),
                mean_reward: reward_sum / n as f64,
                success_rate: successes as f64 / n as f64,
                mean_kl: value.mean_kl,
                objective: value.objective,
                grad_norm: l2_norm(&value.gradient),
            });
            log::debug!(
                "iteration {it}: success {:.3}, reward {:.3}, kl {:.4}",
                report.iterations[it].success_rate,
                report.iterations[it].mean_reward,
                value.mean_kl
            );
        }
        Ok(TrainOutcome { policy, report })
    }
}

/// Trains a uniform template policy on `tasks` with scripted frozen roles.
pub fn train_planner(spec: Arc<WorldSpec>, tasks: &[Task], config: TrainConfig) -> Result<TrainOutcome, GrpoError> {
    let initial = PolicyParams::for_world(&spec, config.temperature)?;
    Trainer::scripted(spec, config).train(tasks, initial)
}

/// `table[task][template]`: whether forcing that template solves the task.
pub fn template_success_table(
    spec: &Arc<WorldSpec>,
    tasks: &[Task],
    policy: &PolicyParams,
    roles: &dyn FrozenRoles,
    limits: EpisodeLimits,
) -> Vec<Vec<bool>> {
    let shared = Arc::new(policy.clone());
    tasks
        .par_iter()
        .map(|task| {
            (0..policy.n_templates())
                .map(|k| {
                    let clock = FrozenClock;
                    let runner = EpisodeRunner {
                        prompts: PromptLibrary::builtin(),
                        limits,
                        clock: &clock,
                    };
                    let mut world = World::new(Arc::clone(spec), 0);
                    let mut planner = PolicyPlanner::forced(Arc::clone(&shared), k);
                    runner
                        .run(&mut world, task, &mut planner, roles.actor().as_mut(), roles.memory().as_mut())
                        .map(|t| t.success)
                        .unwrap_or(false)
                })
                .collect()
        })
        .collect()
}

/// Exact expected success of sampling a template from the policy at each
/// task's first planning context.
pub fn expected_success(
    spec: &Arc<WorldSpec>,
    tasks: &[Task],
    policy: &PolicyParams,
    roles: &dyn FrozenRoles,
    table: &[Vec<bool>],
) -> f64 {
    let mut total = 0.0;
    for (task, row) in tasks.iter().zip(table) {
        let mut world = World::new(Arc::clone(spec), 0);
        let ctx = match world.reset(task) {
            Ok(obs) => roles
                .memory()
                .begin(task, &obs)
                .unwrap_or_else(|_| crate::memory::MemoryContext::empty(crate::memory::DEFAULT_DIM)),
            Err(_) => continue,
        };
        let p = policy.probs(&policy.featurize(task, &ctx));
        total += p.iter().zip(row).filter(|(_, &ok)| ok).map(|(pk, _)| pk).sum::<f64>();
    }
    total / tasks.len().max(1) as f64
}

/// Monte-Carlo success rate of the policy over `rollouts` episodes per task.
pub fn evaluate_policy(
    spec: &Arc<WorldSpec>,
    tasks: &[Task],
    policy: &PolicyParams,
    roles: &dyn FrozenRoles,
    rollouts: usize,
    seed: u64,
) -> f64 {
    let shared = Arc::new(policy.clone());
    let jobs: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|t| (0..rollouts).map(move |r| (t, r)))
        .collect();
    let wins: usize = jobs
        .par_iter()
        .map(|&(t, r)| {
            let clock = FrozenClock;
            let runner = EpisodeRunner {
                prompts: PromptLibrary::builtin(),
                limits: EpisodeLimits::default(),
                clock: &clock,
            };
            let s = derive_seed(&[seed, t as u64, r as u64]);
            let mut world = World::new(Arc::clone(spec), s);
            let mut planner = PolicyPlanner::new(Arc::clone(&shared), s);
            runner
                .run(&mut world, &tasks[t], &mut planner, roles.actor().as_mut(), roles.memory().as_mut())
                .map(|tr| usize::from(tr.success))
                .unwrap_or(0)
        })
        .sum();
    wins as f64 / jobs.len().max(1) as f64
}

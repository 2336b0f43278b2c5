use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{
    ActorPort, EpisodeLimits, EpisodeRunner, FrozenClock, GroundingActor, MemoryPort, NoMemory, Trajectory,
};
use crate::client::PromptLibrary;
use crate::env::{Task, World, WorldSpec};
use crate::judge::{judge_trajectory, JudgePort, RewardRecord};
use crate::memory::MemoryManager;
use crate::seed::derive_seed;

use super::objective::{normalize_advantages_with, StdKind};
use super::policy::{PlanningRecord, PolicyParams, PolicyPlanner};
use super::GrpoError;

/// Builds per-episode instances of the frozen (non-trained) roles.
pub trait FrozenRoles: Send + Sync {
    fn actor(&self) -> Box<dyn ActorPort>;
    fn memory(&self) -> Box<dyn MemoryPort>;
}

/// Grounding actor plus either no memory or a gated manager over a shared
/// bank that training only reads.
#[derive(Default)]
pub struct ScriptedRoles {
    pub memory: Option<MemoryManager>,
}

impl FrozenRoles for ScriptedRoles {
    fn actor(&self) -> Box<dyn ActorPort> {
        Box::new(GroundingActor)
    }

    fn memory(&self) -> Box<dyn MemoryPort> {
        match &self.memory {
            Some(m) => Box::new(m.fork()),
            None => Box::new(NoMemory::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub group_size: usize,
    pub judge_votes: usize,
    pub limits: EpisodeLimits,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            group_size: 8,
            judge_votes: crate::judge::DEFAULT_VOTES,
            limits: EpisodeLimits::default(),
        }
    }
}

/// G same-task episodes with their judged rewards and planning records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub task: Task,
    pub trajectories: Vec<Trajectory>,
    pub judgements: Vec<Option<RewardRecord>>,
    pub rewards: Vec<f64>,
    /// Planning steps of each trajectory, reward already broadcast.
    pub records: Vec<Vec<PlanningRecord>>,
    /// Empty until `normalize` runs.
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn normalize(&mut self, std_kind: StdKind) -> Result<(), GrpoError> {
        self.advantages = normalize_advantages_with(&self.rewards, std_kind)?;
        Ok(())
    }

    pub fn success_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.success).count()
    }
}

struct Rollout {
    trajectory: Trajectory,
    judgement: Option<RewardRecord>,
    records: Vec<PlanningRecord>,
}

fn one_rollout(
    spec: &Arc<WorldSpec>,
    task: &Task,
    policy: &Arc<PolicyParams>,
    roles: &dyn FrozenRoles,
    judge: &dyn JudgePort,
    cfg: &CollectConfig,
    seed: u64,
) -> Rollout {
    let clock = FrozenClock;
    let runner = EpisodeRunner {
        prompts: PromptLibrary::builtin(),
        limits: cfg.limits,
        clock: &clock,
    };
    let mut world = World::new(Arc::clone(spec), seed);
    let mut planner = PolicyPlanner::new(Arc::clone(policy), seed);
    let mut actor = roles.actor();
    let mut memory = roles.memory();
    let trajectory = match runner.run(&mut world, task, &mut planner, actor.as_mut(), memory.as_mut()) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("rollout of {} failed to start: {e}", task.task_id);
            Trajectory::aborted(task.clone(), e.to_string())
        }
    };
    let judgement = match judge_trajectory(&trajectory, judge, PromptLibrary::builtin(), cfg.judge_votes) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("judging {} failed, reward 1: {e}", task.task_id);
            None
        }
    };
    let reward = judgement.as_ref().map_or(1.0, |r| f64::from(r.reward));
    let mut records = planner.records;
    for r in &mut records {
        r.reward = reward;
    }
    Rollout {
        trajectory,
        judgement,
        records,
    }
}

/// Runs `group_size` independent episodes in parallel. Episode `i` uses
/// seed `derive(seed, i)`, so results do not depend on thread scheduling.
/// Episodes that fail outright count as reward-1 trajectories.
pub fn collect_group(
    spec: &Arc<WorldSpec>,
    task: &Task,
    policy: &Arc<PolicyParams>,
    roles: &dyn FrozenRoles,
    judge: &dyn JudgePort,
    cfg: &CollectConfig,
    seed: u64,
) -> Result<RolloutGroup, GrpoError> {
    if cfg.group_size < 2 {
        return Err(GrpoError::GroupTooSmall(cfg.group_size));
    }
    let rollouts: Vec<Rollout> = (0..cfg.group_size)
        .into_par_iter()
        .map(|i| one_rollout(spec, task, policy, roles, judge, cfg, derive_seed(&[seed, i as u64])))
        .collect();
    let mut group = RolloutGroup {
        task: task.clone(),
        trajectories: Vec::with_capacity(rollouts.len()),
        judgements: Vec::with_capacity(rollouts.len()),
        rewards: Vec::with_capacity(rollouts.len()),
        records: Vec::with_capacity(rollouts.len()),
        advantages: Vec::new(),
    };
    for r in rollouts {
        group.rewards.push(r.judgement.as_ref().map_or(1.0, |j| f64::from(j.reward)));
        group.trajectories.push(r.trajectory);
        group.judgements.push(r.judgement);
        group.records.push(r.records);
    }
    Ok(group)
}

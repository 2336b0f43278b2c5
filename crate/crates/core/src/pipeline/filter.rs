use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeLimits, EpisodeRunner, FrozenClock, GroundingActor, NoMemory, ReferencePlanner};
use crate::client::PromptLibrary;
use crate::env::{Task, World, WorldSpec};
use crate::seed::{derive_seed, str_hash};

use super::persist::{load_jsonl, save_jsonl};
use super::propose::TaskCandidate;
use super::PipelineError;

pub const DEFAULT_FILTER_ROLLOUTS: usize = 6;

/// Attempts a task once; `Ok(true)` on success.
pub trait RolloutAgent: Send + Sync {
    fn rollout(&self, spec: &Arc<WorldSpec>, task: &Task, seed: u64) -> Result<bool, String>;
}

/// Reference-plan planner with the grounding actor and no memory.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedRolloutAgent {
    pub limits: EpisodeLimits,
}

impl RolloutAgent for ScriptedRolloutAgent {
    fn rollout(&self, spec: &Arc<WorldSpec>, task: &Task, seed: u64) -> Result<bool, String> {
        let clock = FrozenClock;
        let runner = EpisodeRunner {
            prompts: PromptLibrary::builtin(),
            limits: self.limits,
            clock: &clock,
        };
        let mut world = World::new(Arc::clone(spec), seed);
        runner
            .run(&mut world, task, &mut ReferencePlanner, &mut GroundingActor, &mut NoMemory::default())
            .map(|t| t.success)
            .map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRate {
    pub task_id: String,
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
    pub kept: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub proposed: usize,
    pub kept: usize,
    pub rates: Vec<TaskRate>,
}

impl FilterReport {
    pub fn from_rates(rates: Vec<TaskRate>) -> Self {
        FilterReport {
            proposed: rates.len(),
            kept: rates.iter().filter(|r| r.kept).count(),
            rates,
        }
    }

    /// One `TaskRate` per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        save_jsonl(&self.rates, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Ok(Self::from_rates(load_jsonl(path)?))
    }
}

/// Runs `n` rollouts per candidate (all in parallel) and keeps candidates
/// with at least one success. A rollout that errors or panics counts as a
/// failure. Rollout `r` of a task is seeded from `(seed, task_id, r)`, so a
/// larger `n` replays a superset of the same rollouts.
pub fn filter_tasks(
    candidates: &[TaskCandidate],
    spec: &Arc<WorldSpec>,
    agent: &dyn RolloutAgent,
    n: usize,
    seed: u64,
) -> Result<(Vec<TaskCandidate>, FilterReport), PipelineError> {
    if n == 0 {
        return Err(PipelineError::Config("filter needs at least one rollout per task".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..n).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<bool> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let task = &candidates[c].task;
            let s = derive_seed(&[seed, str_hash(&task.task_id), r as u64]);
            match catch_unwind(AssertUnwindSafe(|| agent.rollout(spec, task, s))) {
                Ok(Ok(ok)) => ok,
                Ok(Err(e)) => {
                    log::warn!("rollout {r} of {} failed: {e}", task.task_id);
                    false
                }
                Err(_) => {
                    log::warn!("rollout {r} of {} panicked", task.task_id);
                    false
                }
            }
        })
        .collect();

    let mut kept = Vec::new();
    let mut rates = Vec::with_capacity(candidates.len());
    for (c, cand) in candidates.iter().enumerate() {
        let successes = outcomes[c * n..(c + 1) * n].iter().filter(|&&ok| ok).count();
        let mut scored = cand.clone();
        scored.rollout_successes = successes;
        scored.rollout_total = n;
        rates.push(TaskRate {
            task_id: cand.task.task_id.clone(),
            successes,
            total: n,
            rate: successes as f64 / n as f64,
            kept: successes > 0,
        });
        if successes > 0 {
            kept.push(scored);
        }
    }
    Ok((kept, FilterReport::from_rates(rates)))
}

/// Manual review outcome: explicit allow and deny lists of task ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QualityList {
    pub allow: BTreeSet<String>,
    pub deny: BTreeSet<String>,
}

impl QualityList {
    /// Lines of `allow <task_id>` or `deny <task_id>`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut list = QualityList::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once(char::is_whitespace) {
                Some(("allow", id)) => {
                    list.allow.insert(id.trim().to_string());
                }
                Some(("deny", id)) => {
                    list.deny.insert(id.trim().to_string());
                }
                _ => return Err(format!("line {}: expected `allow <id>` or `deny <id>`", i + 1)),
            }
        }
        Ok(list)
    }

    /// Denied ids never pass; a non-empty allow list admits only its ids.
    pub fn admits(&self, task_id: &str) -> bool {
        !self.deny.contains(task_id) && (self.allow.is_empty() || self.allow.contains(task_id))
    }
}

pub fn apply_quality_list(candidates: Vec<TaskCandidate>, list: &QualityList) -> Vec<TaskCandidate> {
    candidates.into_iter().filter(|c| list.admits(&c.task.task_id)).collect()
}

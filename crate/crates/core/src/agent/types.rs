use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation, Task};
use crate::memory::UpdateDecision;

pub const DEFAULT_MAX_STEPS: usize = 15;
pub const DEFAULT_PARSE_RETRIES: usize = 2;
pub const DEFAULT_HISTORY_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub raw: String,
}

impl Plan {
    pub fn from_steps(steps: Vec<String>) -> Self {
        let raw = steps.join("\n");
        Plan { steps, raw }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub text: String,
    pub is_stop: bool,
}

impl Subgoal {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let is_stop = text.trim().to_uppercase() == "STOP";
        Subgoal { text, is_stop }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// Observation the planner saw at this step.
    pub observation: Observation,
    pub plan: Plan,
    pub subgoal: Subgoal,
    /// None on the step where the planner yielded STOP or the actor failed.
    pub action: Option<Action>,
    pub note: String,
    /// Page after the action executed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_page: Option<String>,
    #[serde(default)]
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_update: Option<UpdateDecision>,
    pub wall_ms: u64,
}

/// Why an episode ended. Exactly one per trajectory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StopAction,
    StopSubgoal,
    StepLimit,
    PlannerError(String),
    ActorError(String),
    MemoryError(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task: Task,
    pub steps: Vec<TrajectoryStep>,
    pub final_answer: Option<String>,
    pub success: bool,
    /// Goal conditions satisfied at the end, out of `task.goal.len()`.
    pub goal_met: usize,
    pub termination: Termination,
    pub total_ms: u64,
}

impl Trajectory {
    pub fn goal_total(&self) -> usize {
        self.task.goal.len()
    }

    /// Trajectory of zero steps for an episode that could not start.
    pub fn aborted(task: Task, why: String) -> Self {
        Trajectory {
            task,
            steps: Vec::new(),
            final_answer: None,
            success: false,
            goal_met: 0,
            termination: Termination::PlannerError(why),
            total_ms: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeLimits {
    pub max_steps: usize,
    /// Total parse attempts for one planner or actor call before giving up.
    pub parse_retries: usize,
    /// Recent (observation, action) pairs shown to the plan-update prompt.
    pub history_window: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        EpisodeLimits {
            max_steps: DEFAULT_MAX_STEPS,
            parse_retries: DEFAULT_PARSE_RETRIES,
            history_window: DEFAULT_HISTORY_WINDOW,
        }
    }
}

impl EpisodeLimits {
    pub fn attempts(&self) -> usize {
        self.parse_retries.max(1)
    }
}

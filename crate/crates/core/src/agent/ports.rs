//! Behavioral interfaces for the three agent roles. Each role can be backed
//! by a scripted implementation, a remote model, or (planner only) the
//! trainable template policy.

use crate::client::ChatMessage;
use crate::env::{Action, Observation, Task};
use crate::memory::{MemoryContext, UpdateDecision};
use crate::port::PortError;

use super::types::{Plan, Subgoal};

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryItem {
    pub observation: Observation,
    pub action: Action,
    pub note: String,
}

pub struct PlannerRequest<'a> {
    pub step_index: usize,
    pub task: &'a Task,
    pub observation: &'a Observation,
    pub memory: &'a MemoryContext,
    pub history: &'a [HistoryItem],
    pub previous_plan: Option<&'a Plan>,
    /// Rendered prompt for model-backed planners.
    pub messages: &'a [ChatMessage],
    /// Zero-based parse attempt for this step.
    pub attempt: usize,
}

pub trait PlannerPort: Send {
    fn propose(&mut self, req: &PlannerRequest<'_>) -> Result<String, PortError>;
}

pub struct ActorRequest<'a> {
    pub task: &'a Task,
    pub plan: &'a Plan,
    pub subgoal: &'a Subgoal,
    pub observation: &'a Observation,
    pub action_space: &'a str,
    pub messages: &'a [ChatMessage],
    pub attempt: usize,
}

pub trait ActorPort: Send {
    fn act(&mut self, req: &ActorRequest<'_>) -> Result<String, PortError>;
}

pub trait MemoryPort: Send {
    /// Context for the first planning step.
    fn begin(&mut self, task: &Task, observation: &Observation) -> Result<MemoryContext, PortError>;

    /// Runs the update gate after a step. `None` when the gate is not
    /// consulted at this step.
    fn after_step(
        &mut self,
        task: &Task,
        recent_observations: &[Observation],
        recent_actions: &[Action],
        current: &MemoryContext,
    ) -> Result<Option<(UpdateDecision, MemoryContext)>, PortError>;
}

/// Memory that never retrieves anything.
#[derive(Clone, Copy, Debug)]
pub struct NoMemory {
    pub dim: usize,
}

impl Default for NoMemory {
    fn default() -> Self {
        NoMemory {
            dim: crate::memory::DEFAULT_DIM,
        }
    }
}

impl MemoryPort for NoMemory {
    fn begin(&mut self, _task: &Task, _observation: &Observation) -> Result<MemoryContext, PortError> {
        Ok(MemoryContext::empty(self.dim))
    }

    fn after_step(
        &mut self,
        _task: &Task,
        _recent_observations: &[Observation],
        _recent_actions: &[Action],
        _current: &MemoryContext,
    ) -> Result<Option<(UpdateDecision, MemoryContext)>, PortError> {
        Ok(None)
    }
}

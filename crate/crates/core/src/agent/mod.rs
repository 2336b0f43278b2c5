//! The planner / actor / memory orchestration loop.

mod episode;
mod parse;
mod ports;
mod scripted;
mod types;

pub use episode::{
    act_step, actor_messages, plan_step, planner_messages, run_episode, Clock, EpisodeRunner,
    FrozenClock, PlanningInput, SystemClock, ACTION_SPACE,
};
pub use parse::{
    format_plan_output, parse_action_output, parse_generated_plan, parse_plan_output,
    ActionParseError, PlanParseError,
};
pub use ports::{
    ActorPort, ActorRequest, HistoryItem, MemoryPort, NoMemory, PlannerPort, PlannerRequest,
};
pub use scripted::{find_label, ground_subgoal, CannedActor, CannedPlanner, GroundingActor, ReferencePlanner};
pub use types::{
    EpisodeLimits, Plan, Subgoal, Termination, Trajectory, TrajectoryStep, DEFAULT_HISTORY_WINDOW,
    DEFAULT_MAX_STEPS, DEFAULT_PARSE_RETRIES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("planner output error: {0}")]
    PlannerOutput(String),
    #[error("actor output error: {0}")]
    ActorOutput(String),
    #[error(transparent)]
    Port(#[from] crate::port::PortError),
    #[error(transparent)]
    Prompt(#[from] crate::client::ClientError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}
